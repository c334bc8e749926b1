fn main() {
    std::process::exit(travbench::cli_io::run_command(std::env::args_os()));
}
