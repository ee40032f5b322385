fn main() {
    std::process::exit(timebin_hom::cli::run(std::env::args_os()));
}
