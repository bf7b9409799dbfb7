fn main() {
    std::process::exit(capital_game::cli::cli_main(std::env::args_os()));
}
