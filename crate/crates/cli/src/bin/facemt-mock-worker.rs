//! A line-protocol classifier for exercising the subprocess transport.
//!
//! Replies to the hello, then scores each request's image with either a
//! constant (`--score`) or its mean channel value / 255. Unreadable images
//! get an error response. `--hang-after N` stops answering after N requests;
//! `--exit-after N` exits after N requests; `--hello <version>` announces a
//! different protocol version.

use std::io::{BufRead, Write};

use anyhow::{Context, Result};
use clap::Parser;
use facemt_core::gateway::{decode_image_payload, Hello, Request, Response};

#[derive(Debug, Parser)]
struct Opts {
    #[arg(long)]
    score: Option<f64>,
    #[arg(long)]
    hang_after: Option<usize>,
    #[arg(long)]
    exit_after: Option<usize>,
    #[arg(long, default_value = facemt_core::gateway::PROTOCOL_VERSION)]
    hello: String,
}

fn main() -> Result<()> {
    let opts = Opts::parse();
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let mut lines = stdin.lock().lines();

    let first = lines.next().context("no hello")??;
    let _: Hello = serde_json::from_str(&first).context("first line must be a hello")?;
    writeln!(stdout, "{}", Hello { hello: opts.hello.clone() }.to_line())?;
    stdout.flush()?;

    let mut served = 0usize;
    for line in lines {
        let line = line?;
        if opts.exit_after.is_some_and(|n| served >= n) {
            return Ok(());
        }
        if opts.hang_after.is_some_and(|n| served >= n) {
            served += 1;
            continue;
        }
        served += 1;
        let reply = match serde_json::from_str::<Request>(&line) {
            Ok(req) => match decode_image_payload(&req.image) {
                Ok(img) => Response::score(req.id, opts.score.unwrap_or(img.mean_value() / 255.0)),
                Err(e) => Response::error(req.id, e),
            },
            Err(e) => {
                eprintln!("malformed request: {e}");
                continue;
            }
        };
        writeln!(stdout, "{}", reply.to_line())?;
        stdout.flush()?;
    }
    Ok(())
}
