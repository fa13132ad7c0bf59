//! Mutated corpus files never crash the pipeline.

use std::time::Duration;

use minibmc_core::{verify_source, RunOptions, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus_sources() -> Vec<String> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|p| std::fs::read_to_string(p).unwrap()).collect()
}

fn mutate(src: &str, rng: &mut ChaCha8Rng) -> String {
    let mut bytes = src.as_bytes().to_vec();
    const PIECES: [&str; 16] = ["{", "}", "(", ")", ";", "*", "&", "&&", "throw", "try", "catch", "new", "delete", "<", ">", "template"];
    for _ in 0..rng.gen_range(1..4) {
        if bytes.is_empty() {
            break;
        }
        let at = rng.gen_range(0..bytes.len());
        match rng.gen_range(0..3) {
            0 => {
                let end = (at + rng.gen_range(1..8)).min(bytes.len());
                bytes.drain(at..end);
            }
            1 => {
                let piece = PIECES[rng.gen_range(0..PIECES.len())];
                bytes.splice(at..at, piece.bytes());
            }
            _ => {
                let end = (at + rng.gen_range(1..16)).min(bytes.len());
                let chunk = bytes[at..end].to_vec();
                let to = rng.gen_range(0..bytes.len());
                bytes.splice(to..to, chunk);
            }
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn mutated_programs_end_in_a_verdict() {
    let sources = corpus_sources();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = RunOptions { timeout: Some(Duration::from_secs(20)), ..Default::default() };
    let mut verified = 0;
    for round in 0..400 {
        let base = &sources[round % sources.len()];
        let src = mutate(base, &mut rng);
        let v = verify_source(&src, "m.cpp", &opts);
        if v.status == Status::Error {
            let msg = v.error.unwrap_or_default();
            assert!(!msg.starts_with("internal error"), "round {round}: {msg}\n{src}");
        } else {
            verified += 1;
        }
    }
    eprintln!("{verified} of 400 mutants reached a verdict");
    assert!(verified > 0);
}

#[test]
fn deeply_nested_input_is_rejected_cleanly() {
    let src = format!("int main() {{ int x = {}1{}; }}", "(".repeat(5000), ")".repeat(5000));
    let v = verify_source(&src, "deep.cpp", &RunOptions::default());
    assert_ne!(v.status, Status::Failed);
}
