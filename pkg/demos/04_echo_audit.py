"""
Echo audit of single-precision error
====================================

Evolving forward for t_f and backward for t_f should return the initial
state. The leftover overlap error measures rounding. In single precision it
grows with t_f; in double precision it stays near machine epsilon. A direct
single-versus-double forward run at 2 t_f gives nearly the same number, which
is why the echo is a usable proxy when no double-precision run is affordable.
"""

from floqsim import HeatingConfig, build_ensemble, run_echo
from floqsim.experiments import precision_fidelity_error

ensemble = build_ensemble(0, 39)
single = HeatingConfig(L=10, omega=8.0)
double = HeatingConfig(L=10, omega=8.0, precision="double")

print(" periods   echo(single)   echo(double)   direct(2 t_f)")
for n in (1, 10, 100, 1000):
    t_f = n * single.period
    e1 = run_echo(single, t_f, ensemble).overlap_error
    e2 = run_echo(double, t_f, ensemble).overlap_error
    d = precision_fidelity_error(single, 2 * n, ensemble)
    print(f"{n:8d}   {e1:12.3e}   {e2:12.3e}   {d:13.3e}")
