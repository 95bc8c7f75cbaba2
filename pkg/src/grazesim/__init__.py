"""Grazing-incidence atom-surface scattering: classical, quantum and quasiresonance analysis."""
