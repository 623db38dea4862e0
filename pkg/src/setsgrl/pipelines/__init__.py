"""Pipeline stages: sample, train, eval, benchmarks and reports."""
