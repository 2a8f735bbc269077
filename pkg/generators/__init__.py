from .stopping import (
    harmonic_instance,
    exp_trap_instance,
    benchmark_gap_instance,
    ski_rental_instance,
    ski_rental_mixture,
    random_supermartingale,
    GeneratorSpec,
    generate,
)
from .mssc import random_mssc_instance
