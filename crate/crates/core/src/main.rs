fn main() -> std::process::ExitCode {
    iwip::cli::main()
}
