fn main() -> std::process::ExitCode {
    navhint_cli::args::run()
}
