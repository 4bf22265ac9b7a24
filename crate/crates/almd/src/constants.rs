//! Units and the versioned constants of the built-in toy system.
//!
//! Unit system: nm, ps, K, amu, kJ·mol⁻¹. These are mutually consistent:
//! 1 kJ·mol⁻¹·nm⁻¹ acting on 1 amu gives an acceleration of exactly
//! 1 nm·ps⁻², so the integrators carry no conversion factors.

/// Boltzmann constant in kJ·mol⁻¹·K⁻¹.
pub const KB: f64 = 0.0083144621;

/// Version tag for the toy-system constants below. Bump on any change so
/// cached reference trajectories and manifests stay comparable.
pub const TOY_CONSTANTS_VERSION: &str = "toy-v1";

/// Default parameters of the toy residue chain.
///
/// Each residue is three atoms: a bead-site atom `B` (the Cα stand-in), a
/// backbone linker `L`, and a side atom `D`. The covalent backbone runs
/// B–L–B–L–…; the torsion about each L–B backbone bond carries a
/// double-well term `k_w (cos φ − c)²` whose barrier (k_w at c = 0) is
/// about 3 k_B·T at 300 K, so both wells are reachable in short runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyParams {
    /// B–L backbone bond length (nm).
    pub bond_bl_r0: f64,
    /// B–D side bond length (nm).
    pub bond_bd_r0: f64,
    /// Bond force constant (kJ·mol⁻¹·nm⁻²), shared by all bonds.
    pub bond_k: f64,
    /// Backbone angle B–L–B and L–B–L equilibrium (rad).
    pub angle_backbone_theta0: f64,
    /// Side-atom angle (D–B–L, L–B–D) equilibrium (rad).
    pub angle_side_theta0: f64,
    /// Angle force constant (kJ·mol⁻¹·rad⁻²), shared by all angles.
    pub angle_k: f64,
    /// Double-well torsion strength k_w (kJ·mol⁻¹).
    pub dihedral_kw: f64,
    /// Double-well torsion offset c in `k_w (cos φ − c)²`.
    pub dihedral_c: f64,
    /// Lennard-Jones (σ nm, ε kJ·mol⁻¹) per atom kind: [B, L, D].
    pub lj: [(f64, f64); 3],
    /// Atom masses (amu) per kind: [B, L, D].
    pub masses: [f64; 3],
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams {
            bond_bl_r0: 0.22,
            bond_bd_r0: 0.20,
            bond_k: 8000.0,
            angle_backbone_theta0: 120.0_f64.to_radians(),
            angle_side_theta0: 109.5_f64.to_radians(),
            angle_k: 300.0,
            // Barrier k_w·(1−c)² ≈ 3 k_B·T at 300 K (k_B·T ≈ 2.494 kJ/mol).
            dihedral_kw: 7.5,
            dihedral_c: 0.0,
            lj: [(0.30, 0.40), (0.28, 0.35), (0.31, 0.45)],
            masses: [12.011, 14.007, 15.999],
        }
    }
}

impl ToyParams {
    /// Key-value echo of every constant, written into run manifests so a
    /// result can always be traced to the exact toy system that produced it.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("toy.version".into(), TOY_CONSTANTS_VERSION.into()),
            ("toy.bond_bl_r0".into(), format!("{}", self.bond_bl_r0)),
            ("toy.bond_bd_r0".into(), format!("{}", self.bond_bd_r0)),
            ("toy.bond_k".into(), format!("{}", self.bond_k)),
            (
                "toy.angle_backbone_theta0".into(),
                format!("{}", self.angle_backbone_theta0),
            ),
            (
                "toy.angle_side_theta0".into(),
                format!("{}", self.angle_side_theta0),
            ),
            ("toy.angle_k".into(), format!("{}", self.angle_k)),
            ("toy.dihedral_kw".into(), format!("{}", self.dihedral_kw)),
            ("toy.dihedral_c".into(), format!("{}", self.dihedral_c)),
        ];
        for (kind, (sigma, eps)) in ["B", "L", "D"].iter().zip(self.lj.iter()) {
            kv.push((format!("toy.lj.{kind}.sigma"), format!("{sigma}")));
            kv.push((format!("toy.lj.{kind}.epsilon"), format!("{eps}")));
        }
        for (kind, m) in ["B", "L", "D"].iter().zip(self.masses.iter()) {
            kv.push((format!("toy.mass.{kind}"), format!("{m}")));
        }
        kv
    }
}
