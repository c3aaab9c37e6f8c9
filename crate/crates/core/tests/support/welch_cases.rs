//! Welch cases: samples, then t, df and two-tailed p from a 40-digit
//! quadrature of the normalized t density.

pub const WELCH_CASES: [(&[f64], &[f64], f64, f64, f64); 20] = [
    (
        &[101.52, 101.46, 98.78, 99.82, 100.05, 97.61, 100.82, 98.95, 97.25, 100.39, 98.97, 100.78, 100.28, 100.58, 99.96, 102.17, 100.05, 99.46, 100.52, 99.28],
        &[102.69, 103.43, 110.16, 106.78],
        -3.3580966342562305,
        3.1573287309839507,
        0.040576962601785863,
    ),
    (
        &[100.16, 98.53, 99.11, 101.82, 99.27, 101.53, 103.12, 101.48, 96.55, 98.32, 99.17, 95.44, 98.31, 100.97, 99.6, 101.62, 102.52, 103.89, 97.3, 101.33, 98.88, 100.27, 98.56, 100.81, 100.48, 95.66, 101.04],
        &[100.82, 101.33, 98.07, 98.63, 104.65, 101.58, 100.14, 96.07, 96.37, 101.92, 100.83, 104.4, 102.68, 102.67, 101.85, 99.66, 97.68, 104.84, 104.25, 102.7, 99.15, 94.63, 100.94, 104.05, 98.1, 101.1, 101.42, 103.79, 98.77, 104.02, 99.6, 101.32, 103.76, 98.99, 103.25],
        -1.8653454672781451,
        59.854008667326045,
        0.067036584872516693,
    ),
    (
        &[99.7, 100.95, 97.04, 99.18, 101.62, 102.08, 100.86, 102.77, 98.94, 104.64, 103.24, 101.03, 99.1, 97.64, 98.46, 100.63, 96.57, 101.06, 100.02, 99.29, 98.7, 98.64, 101.7, 98.01, 99.05, 100.14, 103.68, 98.84, 98.57, 101.69, 97.95],
        &[106.09, 92.95, 93.1, 95.87, 101.96, 93.5, 111.02, 90.22, 99.62, 100.02, 105.15, 90.13, 95.66, 95.29, 108.51, 93.81, 109.04, 93.5, 107.21, 81.43, 103.02, 104.94, 104.7, 102.71, 92.62, 110.13, 108.8, 92.68, 104.84, 97.23, 102.01, 113.42, 100.54],
        0.0041777282548076079,
        36.772158859477142,
        0.99668924753657,
    ),
    (
        &[98.72, 99.07, 101.03, 99.31, 100.58, 103.99, 100.02, 103.39, 102.89, 99.82, 101.4, 99.7, 100.38, 103.38, 99.35, 96.93, 99.41, 95.67, 102.96, 105.61, 97.57, 101.76, 96.06, 101.64, 99.17, 101.67, 99.45, 99.5, 99.32, 102.48, 99.36, 100.56, 96.99, 100.37, 100.5, 100.19, 98.4],
        &[104.12, 101.19, 98.41, 97.67, 94.09, 102.76, 104.82, 99.78, 99.74, 100.79, 102.6, 102.09, 107.59, 99.67, 103.44, 106.12, 100.98, 97.47, 100.23, 99.56, 102.81, 102.71, 105.57, 101.5, 105.36, 97.85, 100.84, 102.46, 101.15, 103.51, 98.97, 98.61],
        -1.8454237592047435,
        56.943175361792057,
        0.070177546451395684,
    ),
    (
        &[103.43, 92.29, 108.18, 102.28, 99.61, 104.81],
        &[96.9, 96.13, 108.59, 94.68, 95.36, 95.8, 114.14, 96.71, 96.78, 101.57, 96.04, 105.8, 103.82, 91.18, 104.31, 94.2],
        0.83621494196043038,
        10.275047698751573,
        0.42205466063159751,
    ),
    (
        &[99.24, 100.41, 100.17, 101.14, 100.03, 99.15, 100.46, 100.62, 98.86, 100.84, 99.15, 99.12, 101.52],
        &[99.88, 100.54, 97.41, 100.07, 98.98, 101.22, 100.49, 99.71, 102.47, 100.29, 101.21, 100.85, 98.29, 100.44, 100.26, 100.63, 99.63, 101.21, 101.2, 101.37, 99.69, 99.15, 101.89, 101.12, 100.83, 100.83, 100.6, 99.42, 98.57, 99.03],
        -0.59532887088985213,
        28.79228119682037,
        0.55627443453025373,
    ),
    (
        &[99.94, 98.89, 98.05, 101.06, 97.14, 100.73, 101.02, 101.19, 101.79, 100.47, 99.02, 101.52, 98.84, 101.85, 101.3, 101.14, 100.24, 99.81, 99.82, 99.61, 100.4, 101.11, 99.37, 98.17, 100.47, 98.1],
        &[99.03, 98.02, 95.08, 101.59, 98.97, 98.59, 103.78, 100.38, 103.58, 105.58, 102.13, 97.92, 96.57, 98.58, 97.96, 96.85, 97.59, 101.2, 98.62, 102.05, 100.69, 104.06, 97.1, 99.78, 102.12, 103.88],
        -0.04212288143018575,
        35.408137666141197,
        0.96663737961783674,
    ),
    (
        &[105.32, 96.19, 102.95, 91.36, 101.91, 103.26, 108.33, 91.46, 96.83, 94.98, 103.75, 95.84, 98.41, 107.21, 100.48, 93.45, 98.8, 103.65, 97.06, 96.13, 98.13, 96.54, 95.85, 98.53, 104.09, 93.43, 96.49, 97.68, 100.7, 101.28, 103.27],
        &[103.81, 100.83, 99.12, 97.14, 100.75, 101.16, 98.39, 92.87, 104.08, 104.41, 98.85, 98.04, 99.63, 103.07, 110.03, 98.18, 99.22, 100.15, 104.93, 97.02, 100.55, 97.94, 93.8, 102.67, 102.84, 102.67, 99.02, 100.3, 101.54, 104.13, 97.58],
        -1.3267327792406972,
        56.47159486299424,
        0.18993720297930738,
    ),
    (
        &[98.3, 101.85, 104.58, 102.57, 99.66, 96.73, 102.38, 97.1, 100.14, 98.18, 102.74, 102.09, 99.57, 100.67, 99.79, 102.05, 101.72, 99.45, 102.55, 100.5, 101.4, 100.75, 102.79, 99.52, 97.62, 103.02, 96.56, 99.72, 97.07, 99.85, 99.67, 97.2, 103.2, 98.36],
        &[114.67, 99.55, 91.41, 88.7, 89.03, 92.75, 110.55, 100.61, 95.68, 105.91, 97.84, 122.54, 104.73, 85.38, 107.51, 92.46, 92.86, 98.85, 83.83, 96.08, 97.6, 102.63, 104.32, 74.06, 110.95],
        0.86026194812417749,
        25.455513143637075,
        0.39767478626591168,
    ),
    (
        &[104.81, 94.94, 105.37, 101.3, 103.69, 93.51, 101.88, 98.36, 107.82, 101.6, 106.01, 100.97, 89.03, 98.25, 110.75, 100.53, 100.79, 103.34, 106.16],
        &[116.06, 114.48, 107.18, 115.16, 106.97, 105.39, 104.39, 110.65, 98.87, 116.83, 99.57, 107.33, 119.09, 108.91, 109.08, 95.8, 100.15, 99.84, 109.16, 97.62, 111.8, 110.99, 119.5, 92.09, 110.02, 92.19],
        -2.7393511404338759,
        42.61730972000332,
        0.0089516803613609673,
    ),
    (
        &[101.46, 98.48, 102.32, 99.66, 103.03, 98.59, 100.3, 98.08, 102.18, 101.33, 99.41, 100.35, 98.61, 99.04, 100.45, 104.82, 96.42, 97.13],
        &[117.73, 90.58, 117.08, 95.92, 113.14, 104.3, 95.61, 90.5, 89.41, 94.25, 96.99, 104.71, 110.98, 97.25, 82.95, 90.29, 106.34, 103.74, 107.8, 90.34, 109.17, 111.17, 108.79, 97.04, 106.38, 97.43],
        -0.55191788453003613,
        28.687751103920821,
        0.58527890462939352,
    ),
    (
        &[99.44, 99.8, 96.4, 96.77, 102.49, 99.14, 99.56, 99.31, 99.98, 101.39, 101.09, 101.74, 98.97, 100.92, 97.14, 96.66, 102.18, 98.08, 99.73, 95.73, 100.6, 100.85, 99.68, 99.56, 97.84, 98.79, 98.1, 101.52, 101.38],
        &[101.68, 103.7, 102.17, 98.5, 98.25, 100.18, 100.34, 100.76, 102.29, 100.63, 104.9, 104.78, 98.99, 98.4, 99.89, 101.29, 96.36, 99.37, 100.61, 99.69, 100.82, 102.29, 105.25, 102.94, 101.3, 98.51],
        -2.6147814008743128,
        48.507715490054524,
        0.011862167768740053,
    ),
    (
        &[99.56, 97.11, 101.29, 97.44, 99.96, 100.9, 97.28, 99.94, 97.16, 97.53, 101.06, 105.05, 100.73, 102.5, 98.94, 99.51, 102.19, 103.15, 102.68, 99.9, 101.11, 99.99, 101.76, 102.13, 101.92, 98.89, 100.66, 98.78, 103.54, 99.81, 98.48, 103.46, 100.4, 98.81, 98.51, 99.66, 101.56, 101.56, 97.71],
        &[94.44, 87.58, 94.05, 94.0, 102.77, 98.41, 109.31, 87.71, 90.28, 108.55, 86.17],
        1.8444226010878447,
        10.333190441856411,
        0.093947364128047141,
    ),
    (
        &[101.71, 98.78, 98.88, 95.23, 98.87, 102.9, 100.36, 104.05, 100.35, 99.28, 102.94, 98.83, 101.39, 98.17, 101.54, 100.4, 96.85, 102.23, 102.06, 101.1, 101.63, 101.02, 102.19, 101.45, 100.73, 101.13, 102.34, 96.51, 99.37, 101.49, 100.98, 103.4, 101.61, 99.08, 100.23, 95.4, 100.93, 99.24, 101.6, 101.33],
        &[101.4, 100.98, 113.07, 111.93, 94.85, 99.68, 88.71, 113.7, 108.2, 110.4, 88.83, 99.11, 97.0, 91.43, 109.85, 92.23, 94.29, 126.0, 88.48, 81.11, 104.99, 112.7, 96.93, 99.71, 70.33, 84.2, 112.82, 102.93, 101.53, 107.96, 87.01, 105.16, 95.05, 93.65, 103.53, 102.8, 106.71, 98.85, 94.33],
        0.36460261341555743,
        40.69540874138974,
        0.71729592325137948,
    ),
    (
        &[102.59, 99.75, 99.24],
        &[99.94, 101.74, 100.69, 101.68, 102.02, 101.56, 99.77, 102.59, 100.62, 99.94, 101.89, 101.31, 102.11, 100.47, 100.44, 99.65, 100.92, 101.25, 102.28, 102.02, 100.86, 101.02, 100.3, 101.28, 103.24, 101.38],
        -0.62836262474133268,
        2.1204880033722882,
        0.59074200470796094,
    ),
    (
        &[101.74, 99.52, 98.35, 101.96, 99.66, 100.5, 102.87, 99.35, 99.31, 99.51, 101.9, 100.59, 100.77, 100.83],
        &[102.71, 95.26, 103.98, 98.47, 99.88, 102.86, 100.08, 98.98, 103.62, 97.38, 98.34, 103.62, 102.26, 95.83, 96.99, 100.57, 105.57, 100.31, 103.95, 102.59, 103.99, 108.97, 99.84, 104.17, 97.59, 103.78, 99.13, 102.0, 102.7, 105.48],
        -1.286244465898196,
        41.435213736112564,
        0.20549877437755478,
    ),
    (
        &[100.79, 99.59, 100.11, 98.56, 99.52, 100.97, 99.34, 99.58, 100.43, 98.94, 101.58, 101.57, 100.14, 100.32, 101.34, 99.64, 100.66, 98.29, 99.4, 100.26, 101.02, 101.99, 101.4, 98.6, 100.83, 98.94, 98.93, 100.13, 100.4, 99.82, 98.82, 99.47, 100.19, 101.99, 99.8],
        &[100.38, 101.1, 100.66, 100.51, 102.1, 101.1, 100.96, 102.2, 102.53, 99.83, 102.78, 99.76, 100.05, 101.46, 102.5, 102.52, 100.95, 101.56, 100.58, 99.88, 100.31],
        -3.7764573840999803,
        42.911897896031606,
        0.0004845972999701022,
    ),
    (
        &[99.59, 100.51, 101.16, 96.79, 99.95, 98.55, 99.3, 100.4, 100.05, 100.05, 100.97, 100.53, 98.94, 100.25, 100.95, 99.62, 98.44, 100.88, 100.27, 100.31, 99.83, 101.54, 99.11, 99.44, 98.9, 100.18, 99.59, 97.39, 101.55, 99.09, 99.49, 100.11, 100.63, 100.99],
        &[110.36, 105.31, 105.51, 100.34, 107.42, 102.66, 106.85, 101.64, 105.19, 107.64, 104.9, 107.57, 108.16, 109.14, 111.93, 101.22, 101.36, 104.76, 107.33, 99.27, 103.19, 103.46, 107.98, 102.08],
        -7.6320570995903315,
        26.386827280845271,
        3.833106010405733e-8,
    ),
    (
        &[101.63, 96.86, 103.25, 100.42, 102.05, 103.22, 100.86, 101.51, 101.05, 98.95, 101.22, 99.22, 99.98, 98.93, 96.75, 98.06, 98.85, 102.37],
        &[109.69, 106.72, 94.49, 101.28, 112.8, 110.78, 108.11, 112.15, 85.13, 88.7, 104.12, 111.35, 105.29, 85.95],
        -0.86011631036548995,
        13.794882607714213,
        0.40442570082583184,
    ),
    (
        &[99.74, 99.87, 100.74, 99.26, 100.4, 100.11, 99.05, 100.4, 100.81, 99.79, 100.16, 99.12, 99.07],
        &[101.13, 113.18, 92.43, 111.2, 85.3, 110.03, 81.42, 98.36, 96.8, 111.73, 97.27, 93.5, 107.99, 104.13, 108.1, 102.8, 120.74, 103.22, 110.64, 115.19],
        -1.4855791459810455,
        19.218900101179062,
        0.15361000085804937,
    ),
];
