use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    // A panic is a bug; report it on one line like any other failure.
    panic::set_hook(Box::new(|info| {
        let message = info.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        eprintln!("{}", serde_json::json!({ "error": "internal", "message": message }));
    }));
    let code = panic::catch_unwind(|| epiprotect::cli::run(std::env::args_os()))
        .unwrap_or(epiprotect::cli::EXIT_FAILURE);
    ExitCode::from(code as u8)
}
