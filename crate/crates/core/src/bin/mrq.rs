fn main() {
    std::process::exit(mr_quantile::cli::run(std::env::args_os()));
}
