//! Starts the review service on an ephemeral port, submits decisions over
//! HTTP and prints the exported manifest. Pass `--serve` to keep it running.

use std::collections::BTreeMap;

use mmviad::dataset::Split;
use mmviad::review::{service, ReviewStore};
use mmviad::synthetic;
use mmviad::IntervalSet;
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("mmviad-review-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let manifest = synthetic::small_manifest(4, Split::StandardTest, 9);
    let cands: BTreeMap<String, IntervalSet> = manifest
        .clips
        .iter()
        .map(|c| {
            (
                c.clip_id.clone(),
                IntervalSet::try_from_pairs(&[[0.5, 1.53]], 2.0).unwrap(),
            )
        })
        .collect();
    let store = ReviewStore::open(manifest.clone(), cands, &dir.join("decisions.jsonl"), None)?;
    let state = service::AppState::new(store, None);

    if std::env::args().any(|a| a == "--serve") {
        service::run("127.0.0.1:8080".parse()?, state).await?;
        return Ok(());
    }

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(service::serve(listener, state, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let ids: Vec<&str> = manifest.clips.iter().map(|c| c.clip_id.as_str()).collect();
    let bodies = [
        json!({"reviewer_id": "ana", "verdict": "accept"}),
        json!({"reviewer_id": "ana", "verdict": "adjust", "final_intervals": [[0.6, 1.4]]}),
        json!({"reviewer_id": "ben", "verdict": "reject_no_visibility", "note": "glare only"}),
        json!({"reviewer_id": "ben", "verdict": "adjust", "final_intervals": [[0.5, 1.53]]}),
    ];
    for (id, body) in ids.iter().zip(bodies) {
        let r = http
            .post(format!("{base}/clips/{id}/decision"))
            .json(&body)
            .send()
            .await?;
        println!("{id}: {} {}", r.status(), r.text().await?);
    }
    let pending: Value = http
        .get(format!("{base}/clips?status=pending"))
        .send()
        .await?
        .json()
        .await?;
    println!("still pending: {}", pending["total"]);
    let export: Value = http
        .get(format!("{base}/export"))
        .send()
        .await?
        .json()
        .await?;
    for c in export["clips"].as_array().unwrap() {
        println!(
            "{} verified={} {}",
            c["clip_id"], c["verified"], c["gt_intervals"]
        );
    }
    let _ = stop.send(());
    server.await??;
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
