fn main() -> std::process::ExitCode {
    pt_spectra_cli::main_entry(std::env::args_os())
}
