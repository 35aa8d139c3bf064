//! Parses model responses under both grammars and shows strict violations
//! next to what lenient extraction still recovers.

use mmviad::grammar::{self, Grammar};

const SAMPLES: &[(&str, Grammar)] = &[
    (
        "<global_perception>\nA ceramic bowl on a turntable.\n</global_perception>\n\
         <segment_perception>\nA dark mark shows from 0.4s.\n</segment_perception>\n\
         <think>\nThe mark is a crack.\n</think>\n\
         <answer>\n<q1>A</q1>\n<q2>C</q2>\n<q3>B</q3>\n<q4>[0.4,1.5]</q4>\n</answer>",
        Grammar::Structured,
    ),
    (
        "<think>two marks</think><answer><q1>a</q1><q2> D </q2><q3>A</q3><q4>[[0.1,0.3],[1.2,1.9]]</q4></answer>",
        Grammar::Benchmark,
    ),
    (
        "<think>unsure</think>\n<answer>\n<q1>Yes</q1>\n<q2>B</q2>\n<q4>[]</q4>\n</answer>",
        Grammar::Benchmark,
    ),
    ("I think it is defective, answer A.", Grammar::Structured),
];

fn main() {
    for (raw, g) in SAMPLES {
        let r = grammar::parse(raw, *g);
        println!("--- {g:?}: format_ok={}", r.format_ok);
        for v in &r.violations {
            println!("  violation {} @{}: {}", v.code, v.location, v.detail);
        }
        let a = &r.answer;
        println!(
            "  answers q1={:?} q2={:?} q3={:?} q4={}",
            a.q1.map(|l| l.as_char()),
            a.q2.map(|l| l.as_char()),
            a.q3.map(|l| l.as_char()),
            a.q4.as_ref().map_or("-".to_string(), |s| s.to_string())
        );
        if r.format_ok {
            println!(
                "  canonical:\n{}",
                grammar::render_canonical(&r).expect("conformant")
            );
        }
    }
}
