//! Worked instances: regular homotopies of plane curves and the formal
//! side of sphere eversion.

pub mod curves;
pub mod sphere;

pub use curves::{
    formal_family, whitney_graustein, winding_number, winding_number_with, write_frames_csv, ClosedCurve, FrameReport,
    WgOptions, WgReport, WhitneyGraustein,
};
pub use sphere::{
    corrugate_patch, formal_frames, immersion_check, immersion_floor, rotation_formal_solution,
    rotation_holonomy_residual, rotation_section, rotation_sigma_floor, slice_case_analysis, sphere_grid,
    sphere_relation, CorrugateOptions, CorrugateReport, SliceAnalysis, SliceCase, SliceGrid, SphereRelationConfig,
};
