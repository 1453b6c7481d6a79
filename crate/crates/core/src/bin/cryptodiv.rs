fn main() -> std::process::ExitCode {
    cryptodiv::cli::main()
}
