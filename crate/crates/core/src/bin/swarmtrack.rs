fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    swarmtrack::cli::main_with_args(std::env::args_os())
}
