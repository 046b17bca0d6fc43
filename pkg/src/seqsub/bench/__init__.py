"""Instance generators, statistics, experiment orchestration and the CLI."""
