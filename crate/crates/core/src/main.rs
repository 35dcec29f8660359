fn main() -> std::process::ExitCode {
    relaxns::cli::main()
}
