fn main() -> std::process::ExitCode {
    hse_core::cli::main_entry()
}
