"""Dialog-based language learning: synthetic supervision tasks and an
end-to-end memory network trained by imitation, reward-based imitation and
forward prediction."""

__version__ = "0.1.0"
