use std::io;

fn main() {
    let stdin = io::stdin();
    let code = big2::cli::run(
        std::env::args_os(),
        &mut stdin.lock(),
        &mut io::stdout(),
        &mut io::stderr(),
    );
    std::process::exit(code);
}
