fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(riesz_cli::run(std::env::args_os()))
}
