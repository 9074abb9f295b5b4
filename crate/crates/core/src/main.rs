fn main() {
    std::process::exit(multistab_eit::cli::run(std::env::args_os()));
}
