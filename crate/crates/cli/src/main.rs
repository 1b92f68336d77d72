use std::io::{self, Write};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let code = pll_lockin_cli::run_command(std::env::args().collect(), &mut out, &mut io::stderr());
    if out.flush().is_err() {
        return ExitCode::from(pll_lockin_cli::EXIT_IO as u8);
    }
    ExitCode::from(code as u8)
}
