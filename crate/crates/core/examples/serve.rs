//! Starts the HTTP API on `127.0.0.1:8080` (or the address given as the
//! first argument) and prints a request body that opens a session on the
//! synthetic reference dataset.

use std::net::SocketAddr;

use nbhd::service::http::{serve, API_PREFIX};
use nbhd::synthgen::FixtureSpec;

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let addr: SocketAddr = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".into())
        .parse()
        .expect("socket address");
    let body = serde_json::json!({ "synthetic": FixtureSpec::reference() });
    println!("listening on http://{addr}{API_PREFIX}");
    println!("curl -X POST http://{addr}{API_PREFIX}/sessions -H 'content-type: application/json' -d '{body}'");
    serve(addr).await
}
