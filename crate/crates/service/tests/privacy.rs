//! The service must never see client addresses or headers, and must not log.

use std::path::PathBuf;

#[test]
fn sources_do_not_touch_client_metadata() {
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("src");
    let forbidden = ["ConnectInfo", "HeaderMap", "TypedHeader", "user-agent", "SocketAddr", "tracing", "println!", "eprintln!"];
    for entry in std::fs::read_dir(&src).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        for word in forbidden {
            assert!(!text.contains(word), "{} mentions {word}", path.display());
        }
    }
}
