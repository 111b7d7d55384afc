//! Minimal scorer speaking the plugin protocol, for tests.
//!
//! usage: ians-stub-scorer MODE [ARG]
//!   const [v]      answer v (default 0.5)
//!   rms            answer the RMS of the received file
//!   hang-after n   answer n requests, then stop responding
//!   exit-after n   answer n requests, then exit
//!   bad-json       answer garbage
//!   wrong-id       answer with id + 1
//!   error          report an error for every request
//!   no-handshake   never print the handshake

use std::io::{BufRead, Write};

use serde_json::{json, Value};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("const");
    let arg = args.get(1).map(String::as_str);
    let count = || arg.and_then(|a| a.parse::<usize>().ok()).unwrap_or(0);

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if mode == "no-handshake" {
        std::thread::sleep(std::time::Duration::from_secs(3600));
        return;
    }
    writeln!(out, "{}", json!({ "protocol": ians::scorer::PROTOCOL })).unwrap();
    out.flush().unwrap();

    for (served, line) in std::io::stdin().lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let request: Value = serde_json::from_str(&line).expect("request json");
        let id = request["id"].as_u64().expect("request id");
        let path = request["wav_path"].as_str().expect("request path");

        let reply = match mode {
            "const" => json!({ "id": id, "score": arg.and_then(|a| a.parse::<f64>().ok()).unwrap_or(0.5) }),
            "rms" => match ians::dsp::read_wav(path) {
                Ok(w) => json!({ "id": id, "score": w.rms() }),
                Err(e) => json!({ "id": id, "error": e.to_string() }),
            },
            "hang-after" | "exit-after" if served >= count() => {
                if mode == "exit-after" {
                    std::process::exit(3);
                }
                std::thread::sleep(std::time::Duration::from_secs(3600));
                return;
            }
            "hang-after" | "exit-after" => json!({ "id": id, "score": 0.25 }),
            "bad-json" => {
                writeln!(out, "not json {{").unwrap();
                out.flush().unwrap();
                continue;
            }
            "wrong-id" => json!({ "id": id + 1, "score": 0.5 }),
            "error" => json!({ "id": id, "error": "model not loaded" }),
            other => {
                eprintln!("unknown mode {other}");
                std::process::exit(2);
            }
        };
        writeln!(out, "{reply}").unwrap();
        out.flush().unwrap();
    }
}
