fn main() {
    std::process::exit(hierfit::cli::run(std::env::args_os()));
}
