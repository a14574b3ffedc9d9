//! Published classification accuracies used as reference columns in reports.

pub const METHODS: [&str; 7] = ["MCC", "LogReg", "DT", "RBF-SVM", "XG", "LIFT/GPT-J", "LIFT/GPT-3"];

/// (dataset, p, c, cells in [`METHODS`] order)
pub const CLASSIFICATION: &[(&str, usize, usize, [&str; 7])] = &[
    ("circles", 2, 2, ["50.00", "48.58±1.94", "77.42±0.24", "83.08±0.59", "81.42±0.31", "79.95±1.53", "81.17±0.42"]),
    (
        "two circles",
        2,
        2,
        ["50.00", "49.83±4.18", "75.50±0.20", "80.00±0.54", "79.25±0.35", "75.92±1.65", "81.42±0.82"],
    ),
    ("blobs", 2, 4, ["25.00", "96.75±0.00", "96.08±0.82", "96.75±0.00", "96.17±0.12", "96.17±0.59", "96.67±0.24"]),
    ("moons", 2, 4, ["50.00", "88.58±0.12", "99.25±0.41", "100.00±0.00", "99.83±0.12", "99.58±0.42", "100.00±0.00"]),
    (
        "9Clusters",
        2,
        9,
        ["11.25", "100.00±0.00", "100.00±0.00", "100.00±0.00", "100.00±0.00", "99.75±0.00", "100.00±0.00"],
    ),
    ("Customers", 8, 2, ["68.18", "87.12±0.54", "85.98±0.53", "86.36±0.00", "85.23±0.00", "85.23±1.61", "84.85±1.42"]),
    (
        "Pollution",
        15,
        2,
        ["50.00", "58.33±11.79", "77.78±3.93", "58.33±6.81", "63.89±7.86", "63.89±3.93", "63.89±7.86"],
    ),
    ("Spambase", 57, 2, ["60.59", "93.27±0.00", "90.7±0.14", "93.70±0.00", "95.87±0.00", "94.03±0.54", "94.90±0.36"]),
    (
        "Hill-Valley",
        100,
        2,
        ["49.79", "77.78±0.00", "56.38±0.89", "68.72±0.00", "59.26±0.00", "100.00±0.20", "99.73±0.19"],
    ),
    ("IRIS", 4, 3, ["33.33", "96.67±0.00", "97.77±3.85", "100.00±0.00", "100.00±0.00", "96.67±0.00", "97.0±0.00"]),
    ("TAE", 5, 3, ["35.48", "45.16±4.56", "65.59±5.49", "53.76±6.63", "66.67±8.05", "61.29±6.97", "65.59±6.63"]),
    ("CMC", 9, 3, ["42.71", "49.49±0.83", "56.72±0.32", "56.50±0.97", "52.43±0.42", "49.83±0.28", "57.74±0.89"]),
    ("Wine", 13, 3, ["38.89", "100.00±0.00", "93.52±2.62", "100.00±0.00", "97.22±0.00", "93.52±1.31", "92.59±1.31"]),
    ("Vehicle", 18, 4, ["25.88", "80.39±1.00", "63.92±2.37", "81.18±0.48", "73.14±0.28", "64.31±2.37", "70.20±2.73"]),
    ("LED", 7, 10, ["11.00", "68.67±0.94", "66.33±2.87", "68.00±0.82", "66.00±0.82", "65.33±0.47", "69.33±2.05"]),
    ("OPT", 64, 10, ["10.14", "96.53±0.22", "89.8±1.09", "97.95±0.00", "97.48±0.17", "98.22±0.11", "98.99±0.30"]),
    ("Mfeat", 216, 10, ["10.00", "97.67±0.12", "87.67±1.05", "98.83±0.24", "96.75±0.00", "94.17±1.75", "93.08±0.24"]),
    ("Margin", 64, 100, ["0.94", "81.35±0.15", "43.86±1.21", "81.98±0.30", "70.21±0.29", "50.23±1.33", "59.37±0.92"]),
    ("Texture", 64, 100, ["0.94", "81.67±0.97", "46.88±1.93", "83.44±0.89", "70.73±1.41", "50.32±2.18", "67.50±1.42"]),
    ("MNIST", 784, 10, ["11.35", "91.95±0.69", "87.42±0.64", "97.70±0.97", "97.69±0.04", "97.01±1.15", "98.15±0.67"]),
    (
        "Permuted MNIST",
        784,
        10,
        ["11.35", "92.58±0.04", "87.87±0.69", "98.06±0.31", "97.62±0.09", "95.80±0.07", "96.25±0.35"],
    ),
    (
        "Fashion MNIST",
        784,
        10,
        ["10.00", "85.59±0.09", "80.52±0.40", "90.59±0.02", "90.19±0.04", "85.10±0.19", "90.18±0.12"],
    ),
    (
        "Permuted F-MNIST",
        784,
        10,
        ["10.00", "84.95±0.84", "79.91±0.93", "88.04±1.69", "89.93±0.14", "82.25±0.27", "88.92±0.71"],
    ),
];

fn normalize(name: &str) -> String {
    let s: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
    match s.as_str() {
        "nineclusters" => "9clusters".into(),
        "twocircles" => "twocircles".into(),
        _ => s,
    }
}

/// Reference column for one of our method labels.
pub fn method_column(method: &str) -> Option<&'static str> {
    let m = method.to_ascii_lowercase();
    if m == "mcc" {
        Some("MCC")
    } else if m == "logistic" {
        Some("LogReg")
    } else if m.starts_with("lift") {
        Some("LIFT/GPT-3")
    } else {
        None
    }
}

/// Published cell for `dataset` under `column` (one of [`METHODS`]).
pub fn lookup(dataset: &str, column: &str) -> Option<&'static str> {
    let key = normalize(dataset);
    let col = METHODS.iter().position(|m| *m == column)?;
    CLASSIFICATION.iter().find(|r| normalize(r.0) == key).map(|r| r.3[col])
}
