use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("moduli differ: {0} vs {1}")]
    ModulusMismatch(u64, u64),

    #[error("point {x} is outside Z_{modulus}")]
    OutOfRange { x: u64, modulus: u64 },

    #[error("{a} is not invertible modulo {modulus}")]
    NotInvertible { a: u64, modulus: u64 },

    #[error("factors {m} and {l} are not coprime (or do not multiply to the modulus)")]
    BadFactorization { m: u64, l: u64 },

    #[error("group closure exceeded cap of {0} elements")]
    ClosureCap(usize),

    #[error("subgroup of order {order} does not act regularly on Z_{modulus}")]
    NotRegular { order: usize, modulus: u64 },

    #[error("CSS orthogonality violated between X block row {x_block} and Z block row {z_block}")]
    CssOrthogonality { x_block: usize, z_block: usize },

    #[error("matrices are not CSS-orthogonal: X row {x_row} anticommutes with Z row {z_row}")]
    NotOrthogonal { x_row: usize, z_row: usize },

    #[error("inconsistent rank data while extracting logical operators: {0}")]
    RankInconsistency(String),

    #[error("invalid sparse matrix: {0}")]
    BadMatrix(String),

    #[error("alist parse error at line {line}: {msg}")]
    AlistParse { line: usize, msg: String },

    #[error("problem size exceeds capacity: {0}")]
    Capacity(String),

    #[error("code has no logical qubits")]
    NoLogicals,

    #[error("permutation component lies outside the abelian subgroup")]
    OutsideSubgroup,

    #[error("layout is not of the required kind: expected {expected}, got {got}")]
    LayoutKind { expected: &'static str, got: &'static str },

    #[error("move step sends two atoms to cell ({row}, {col})")]
    Collision { row: usize, col: usize },

    #[error("invalid measurement ordering: {0}")]
    BadOrdering(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("syndrome is not in the column space of the check matrix")]
    InfeasibleSyndrome,

    #[error("negative distance {0} um")]
    NegativeDistance(f64),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
