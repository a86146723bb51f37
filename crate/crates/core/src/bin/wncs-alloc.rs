fn main() {
    std::process::exit(wncs_alloc::cli::run(std::env::args_os().skip(1)));
}
