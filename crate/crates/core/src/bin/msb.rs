//! Thin wrapper around `msb_prior::cli`.

fn main() -> std::process::ExitCode {
    msb_prior::cli::main()
}
