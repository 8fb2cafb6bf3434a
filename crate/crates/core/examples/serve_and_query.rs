//! Start the retrieval server on a free port and talk to it over HTTP.
//!
//!     cargo run --example serve_and_query

use std::sync::Arc;

use premsel::index::NewPremise;
use premsel::server::{spawn_server, PremiseService, RetrievalClient, RetrieveRequest, SelectorKind};
use premsel::trainer::{initial_model, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = premsel::corpus::load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/gcd_iff.jsonl"))?;
    let state = corpus.states[0].clone();
    let service = Arc::new(PremiseService::new(initial_model(&corpus, &TrainConfig { dim: 32, ..Default::default() })));
    let id = service.warm_cache(corpus)?;
    let server = spawn_server(Arc::clone(&service), "127.0.0.1:0")?;
    let client = RetrievalClient::new(server.url());
    println!("serving at {} with {:?}", server.url(), client.health()?.snapshots);

    let mut req = RetrieveRequest::new(state.state_text.clone(), 5, id.clone());
    req.module = Some(state.module.clone());
    req.decl_index = Some(state.decl_index);
    req.new_premises = vec![NewPremise {
        name: "scratch_lemma".into(),
        signature: "theorem scratch_lemma : Dvd.dvd (GCDMonoid.gcd x y) y".into(),
    }];
    for _ in 0..2 {
        let resp = client.retrieve(&req)?;
        println!("neural: {:?}  ({:.3} ms)", resp.ranked.iter().map(|s| &s.name).collect::<Vec<_>>(), resp.timings.total_ms);
    }
    println!("embed counts after two requests: {:?}", service.counts());

    req.selector = SelectorKind::Mepo;
    let resp = client.retrieve(&req)?;
    println!("mepo:   {:?}", resp.ranked.iter().map(|s| &s.name).collect::<Vec<_>>());

    let bad = client.retrieve(&RetrieveRequest::new("x", 0, id));
    println!("k = 0 -> {}", bad.unwrap_err());
    server.stop()?;
    Ok(())
}
