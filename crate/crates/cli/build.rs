use std::process::Command;

fn main() {
    let describe = Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    if let Some(d) = describe {
        println!("cargo:rustc-env=PIVOTAL_GIT_DESCRIBE={}-{d}", std::env::var("CARGO_PKG_VERSION").unwrap());
    }
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
