fn main() {
    std::process::exit(smartreply_cli::run(std::env::args_os()));
}
