//! Screens a batch of reasoning traces and keeps only conformant ones.

use mmviad::dataset::Letter;
use mmviad::grammar::{self, Grammar};
use mmviad::synthetic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let l = |c| Letter::new(c).unwrap();
    let mut traces = Vec::new();
    for i in 0..8 {
        let set = synthetic::random_set(&mut rng);
        let mut text =
            synthetic::response_text(Grammar::Structured, l('A'), l('B'), l('C'), &set, &mut rng);
        match i % 4 {
            1 => text = text.replace("</think>", ""),
            2 => text = text.replace("<segment_perception>", "<segment>"),
            3 => text.push_str("\ntrailing remarks"),
            _ => {}
        }
        traces.push((format!("trace-{i}"), text));
    }

    let out = grammar::filter_sft_traces(traces, Grammar::Structured, |t| t.1.as_str());
    let (kept, rejected) = out.counts();
    println!("kept {kept}, rejected {rejected}");
    for (t, why) in &out.rejected {
        let codes: Vec<String> = why.iter().map(|v| v.code.to_string()).collect();
        println!("  {}: {}", t.0, codes.join(", "));
    }
}
