fn main() {
    std::process::exit(foldent::cli::run(std::env::args_os()));
}
