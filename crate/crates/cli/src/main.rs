fn main() {
    std::process::exit(njpo_cli::run(std::env::args_os()));
}
