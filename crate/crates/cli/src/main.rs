fn main() {
    std::process::exit(piezo_cli::run());
}
