fn main() {
    std::process::exit(excmg::cli::run_cli(std::env::args_os()));
}
