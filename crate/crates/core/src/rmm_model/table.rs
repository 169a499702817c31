//! Readings of the under-determined symbols in the closed-form model.
//!
//! Each field is a choice among candidate readings. `None` means the choice
//! has not been made yet and any formula that depends on it fails with
//! [`ModelError::NeedsCalibration`](super::ModelError::NeedsCalibration).

use std::fmt;

use serde::{Deserialize, Serialize};

/// What the per-level extent `D_l` in the temporary-grid anchors measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExtentForm {
    /// `T_l`: temporaries of an `l x l` call.
    Temporaries,
    /// `T_l + l^2`.
    TemporariesPlusOneInput,
    /// `T_l + 2 l^2`: every datum an `l x l` call touches.
    TotalData,
    /// `2 l^2`: the input blocks only.
    InputsOnly,
}

/// Grouping of the first anchor `d1 = 2D - (2 (T_h - 2 (h^2 - 1))`, whose
/// parentheses do not balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnchorGrouping {
    /// Close the open parenthesis at the end: `2D - 2 T_h + 4 (h^2 - 1)`.
    CloseAtEnd,
    /// Drop the stray factor grouping: `2D - (2 T_h - 2 (h^2 - 1))`.
    DropInnerFactor,
}

/// Whether the upper-case dimension in the second grid's row step and in
/// its lower-half shifts is the level dimension or the whole problem size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridDimension {
    Level,
    Global,
}

/// Reading of the subtracted sum `sum_{i=0}^{log l - 1} 2 T_{2^k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SumIndex {
    /// `k` is the running index: `sum_k 2 T_{2^k}`.
    OverK,
    /// `k` is unbound and pinned to the top term: `log l * 2 T_{l/2}`.
    RepeatedTop,
}

/// Shape of the recursive input-count term for matrix A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecursionForm {
    /// `f' = 4l^2 + ...` with recursive calls to the full `f_AB`.
    DoubleLeading,
    /// `f'` without its own leading `4l^2`, recursing into `f'`.
    SingleLeading,
    /// `f'` without its own leading `4l^2`, recursing into `f_AB`.
    SingleLeadingFullRecursion,
}

/// The level at which the `[[1,1],[2,0]]` base grid of `g'` sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaseLevel {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub extent: Option<ExtentForm>,
    pub anchor: Option<AnchorGrouping>,
    pub grid_dimension: Option<GridDimension>,
    pub sum_index: Option<SumIndex>,
    /// Coefficient of the row-bit sum in the A-temporary count.
    pub row_coefficient: Option<u64>,
    pub recursion: Option<RecursionForm>,
    pub g_base: Option<BaseLevel>,
}

impl CalibrationTable {
    pub const EXTENTS: [ExtentForm; 4] =
        [ExtentForm::Temporaries, ExtentForm::TemporariesPlusOneInput, ExtentForm::TotalData, ExtentForm::InputsOnly];
    pub const ANCHORS: [AnchorGrouping; 2] = [AnchorGrouping::CloseAtEnd, AnchorGrouping::DropInnerFactor];
    pub const DIMENSIONS: [GridDimension; 2] = [GridDimension::Level, GridDimension::Global];
    pub const SUM_INDICES: [SumIndex; 2] = [SumIndex::OverK, SumIndex::RepeatedTop];
    pub const ROW_COEFFICIENTS: [u64; 2] = [1, 2];
    pub const RECURSIONS: [RecursionForm; 3] =
        [RecursionForm::DoubleLeading, RecursionForm::SingleLeading, RecursionForm::SingleLeadingFullRecursion];
    pub const G_BASES: [BaseLevel; 2] = [BaseLevel::One, BaseLevel::Two];

    /// Nothing resolved.
    pub fn uncalibrated() -> Self {
        Self::default()
    }

    /// The readings that reproduce the trace oracle exactly; equal to what
    /// [`calibrate`](super::calibrate) derives from `N = 2, 4, 8`.
    pub fn resolved() -> Self {
        CalibrationTable {
            extent: Some(ExtentForm::TotalData),
            anchor: Some(AnchorGrouping::DropInnerFactor),
            grid_dimension: Some(GridDimension::Level),
            sum_index: Some(SumIndex::OverK),
            row_coefficient: Some(2),
            recursion: Some(RecursionForm::SingleLeading),
            g_base: Some(BaseLevel::One),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.extent.is_some()
            && self.anchor.is_some()
            && self.grid_dimension.is_some()
            && self.sum_index.is_some()
            && self.row_coefficient.is_some()
            && self.recursion.is_some()
            && self.g_base.is_some()
    }
}

impl fmt::Display for CalibrationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Debug>(x: &Option<T>) -> String {
            x.as_ref().map_or_else(|| "unresolved".to_string(), |v| format!("{v:?}"))
        }
        writeln!(f, "extent D_l          {}", opt(&self.extent))?;
        writeln!(f, "d1 grouping         {}", opt(&self.anchor))?;
        writeln!(f, "DT2 dimension       {}", opt(&self.grid_dimension))?;
        writeln!(f, "f_T subtracted sum  {}", opt(&self.sum_index))?;
        writeln!(f, "f_T row coefficient {}", opt(&self.row_coefficient))?;
        writeln!(f, "f' recursion        {}", opt(&self.recursion))?;
        write!(f, "g' base level       {}", opt(&self.g_base))
    }
}
