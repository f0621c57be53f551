fn main() {
    std::process::exit(rdnbayes::cli::run(std::env::args_os()));
}
