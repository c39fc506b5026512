fn main() -> anyhow::Result<()> {
    acrank_cli::run_from(std::env::args_os())
}
