/// Flush subnormal floats to zero; training slows sharply once small weights underflow.
#[cfg(target_arch = "x86_64")]
#[allow(deprecated)]
fn flush_subnormals() {
    use std::arch::x86_64::{_mm_getcsr, _mm_setcsr};
    // FTZ | DAZ
    unsafe { _mm_setcsr(_mm_getcsr() | 0x8040) }
}

#[cfg(not(target_arch = "x86_64"))]
fn flush_subnormals() {}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    flush_subnormals();
    std::process::exit(amrace_cli::main_with(std::env::args_os()));
}
