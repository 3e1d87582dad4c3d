fn main() {
    std::process::exit(pentimento::cli::run(std::env::args_os()));
}
