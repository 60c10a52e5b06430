//! Equilibrium measures of the weighted logarithmic energy via the obstacle
//! problem for the envelope `V_hat_tau`.

mod droplet;
mod measure;
mod obstacle;

pub use droplet::{
    droplets_nested, extract_droplet, fit_ellipse, harmonic_moment_check, harmonic_moment_defect,
    monotone_tau_check, Droplet, Ellipse, HarmonicTest, EDGE_MARGIN,
};
pub use measure::{
    energy, energy_with_field, equilibrium_measure, harmonicity_set, log_potential,
    log_potential_field, potential_identity, rect_log_integral, DiscreteMeasure, EnergyReport,
    HARMONIC_EPS, PAIR_SELF_RADIUS, POINT_SELF_RADIUS,
};
pub use obstacle::{
    coincidence_mass, coverage_field, mass_radius, solve_obstacle, solve_obstacle_with,
    ObstacleOptions, ObstacleSolution,
};
