fn main() -> std::process::ExitCode {
    hrlgym::cli::main()
}
