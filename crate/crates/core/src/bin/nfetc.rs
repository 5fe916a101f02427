fn main() {
    std::process::exit(nfetc::cli::run(std::env::args_os()));
}
