//! Named invariant checks, their default thresholds and assertion tiers.

use std::fmt;
use std::str::FromStr;

/// When a check is asserted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    /// Holds for every α: always asserted.
    Exact,
    /// Holds in the integer limit: asserted at α = 1, or for any α in strict mode.
    Integer,
    /// Reported only.
    Report,
}

macro_rules! checks {
    ($($variant:ident => $name:literal, $tier:ident, $threshold:expr;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum CheckName {
            $($variant,)*
        }

        impl CheckName {
            pub const ALL: &'static [CheckName] = &[$(CheckName::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(CheckName::$variant => $name,)*
                }
            }

            pub fn tier(self) -> Tier {
                match self {
                    $(CheckName::$variant => Tier::$tier,)*
                }
            }

            pub fn default_threshold(self) -> f64 {
                match self {
                    $(CheckName::$variant => $threshold,)*
                }
            }
        }

        impl FromStr for CheckName {
            type Err = ();

            fn from_str(s: &str) -> Result<Self, ()> {
                match s {
                    $($name => Ok(CheckName::$variant),)*
                    _ => Err(()),
                }
            }
        }
    };
}

checks! {
    CaputoOracle => "caputo_oracle", Exact, 1e-6;
    DeltaSquared => "delta_squared", Exact, 1e-12;
    HodgeIdentity => "hodge_identity", Exact, 1e-12;
    DeltaDerivation => "delta_derivation", Exact, 1e-12;
    WickAssociativity => "wick_associativity", Exact, 1e-12;
    GradedJacobi => "graded_jacobi", Exact, 1e-12;
    MetricCompatibility => "metric_compatibility", Exact, 0.0;
    JCompatibility => "j_compatibility", Exact, 0.0;
    MetricInverse => "metric_inverse", Exact, 0.0;
    ThetaInverse => "theta_inverse", Exact, 0.0;
    JSquared => "j_squared", Exact, 0.0;
    ThetaEqualsGj => "theta_equals_gj", Exact, 0.0;
    PureTorsionBlocks => "pure_torsion_blocks", Exact, 0.0;
    CurvatureAntisymmetry => "curvature_antisymmetry", Exact, 0.0;
    Anholonomy => "anholonomy", Integer, 1e-10;
    CurvatureSymplectic => "curvature_symplectic", Integer, 1e-8;
    PoissonLeibniz => "poisson_leibniz", Integer, 1e-10;
    Nijenhuis => "nijenhuis", Integer, 1e-8;
    ComfTorsion => "comf_torsion", Integer, 1e-8;
    ComfCurvature => "comf_curvature", Integer, 1e-8;
    DeltaTorsion => "delta_torsion", Integer, 1e-8;
    Bianchi => "bianchi", Integer, 1e-8;
    FedosovResidual => "fedosov_residual", Integer, 1e-9;
    Flatness => "flatness", Integer, 1e-8;
    LiftSection => "lift_section", Exact, 0.0;
    LiftFlatness => "lift_flatness", Integer, 1e-9;
    StarC0 => "star_c0", Exact, 0.0;
    StarUnit => "star_unit", Exact, 0.0;
    StarCommutator => "star_commutator", Integer, 1e-8;
    StarAssociativity => "star_associativity", Integer, 1e-8;
    ClosedGamma => "closed_gamma", Integer, 1e-8;
    ClosedLambda => "closed_lambda", Integer, 1e-10;
    ExteriorDSquared => "exterior_d_squared", Integer, 1e-10;
    ChernAssembly => "chern_assembly", Exact, 1e-8;
    ThetaExact => "theta_exact", Integer, 1e-10;
    Gauge => "gauge", Report, f64::INFINITY;
    DivisionDebris => "division_debris", Report, f64::INFINITY;
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for &c in CheckName::ALL {
            assert_eq!(c.as_str().parse::<CheckName>(), Ok(c));
        }
        assert!("nope".parse::<CheckName>().is_err());
    }
}
