fn main() {
    std::process::exit(simcut::cli::run(std::env::args_os()));
}
