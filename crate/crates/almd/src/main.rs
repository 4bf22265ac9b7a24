fn main() {
    eprintln!("almd: command-line interface not wired up yet");
    std::process::exit(2);
}
