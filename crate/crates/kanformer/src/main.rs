fn main() {
    std::process::exit(kanformer::cli::run(std::env::args_os()));
}
