//! A fitted model: kernel bank, transform settings and classifier together.

use std::path::Path;
use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    accuracy, default_alphas, fit_logistic, fit_ridge, Classifier, ClassifierChoice, LogisticProtocol,
};
use crate::container::{Container, Manifest, MODEL_FORMAT};
use crate::data_io::{z_normalize_rows, TimeSeriesDataset};
use crate::kernel_bank::{HydraConfig, KernelBank};
use crate::transform::{transform, FeatureMatrix};
use crate::{HydraError, Result};

/// Everything needed to fit a model besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub config: HydraConfig,
    pub classifier: ClassifierChoice,
    pub normalize_input: bool,
    pub alphas: Vec<f64>,
    pub logistic: LogisticProtocol,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            config: HydraConfig::default(),
            classifier: ClassifierChoice::Auto,
            normalize_input: false,
            alphas: default_alphas(),
            logistic: LogisticProtocol::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub transform_seconds: f64,
    pub train_seconds: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraModel {
    pub config: HydraConfig,
    pub normalize_input: bool,
    pub class_names: Vec<String>,
    pub bank: KernelBank,
    pub classifier: Classifier,
}

impl HydraModel {
    pub fn fit(train: &TimeSeriesDataset, options: &FitOptions) -> Result<(Self, FitReport)> {
        options.config.validate()?;
        let start = Instant::now();
        let bank = KernelBank::generate(&options.config, train.series_len())?;
        let features = transform_input(train.series.view(), options.normalize_input, &bank, &options.config)?;
        let transform_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let classifier = match options.classifier.resolve(train.n_series()) {
            ClassifierChoice::Logistic => Classifier::Logistic(fit_logistic(
                features.values.view(),
                &train.labels,
                train.n_classes(),
                &options.logistic,
            )?),
            _ => Classifier::Ridge(fit_ridge(
                features.values.view(),
                &train.labels,
                train.n_classes(),
                &options.alphas,
            )?),
        };
        let train_seconds = start.elapsed().as_secs_f64();
        let predicted = classifier.predict(features.values.view())?;
        let model = Self {
            config: options.config.clone(),
            normalize_input: options.normalize_input,
            class_names: train.class_names.clone(),
            bank,
            classifier,
        };
        let report = FitReport {
            transform_seconds,
            train_seconds,
            train_accuracy: accuracy(&predicted, &train.labels),
        };
        Ok((model, report))
    }

    pub fn series_len(&self) -> usize {
        self.bank.input_len
    }

    pub fn features(&self, series: ArrayView2<'_, f64>) -> Result<FeatureMatrix> {
        transform_input(series, self.normalize_input, &self.bank, &self.config)
    }

    pub fn predict_scores(&self, series: ArrayView2<'_, f64>) -> Result<ndarray::Array2<f64>> {
        let features = self.features(series)?;
        self.classifier.predict_scores(features.values.view())
    }

    pub fn predict(&self, series: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let features = self.features(series)?;
        self.classifier.predict(features.values.view())
    }

    pub fn save(&self, path: &Path, manifest: Option<Manifest>) -> Result<()> {
        Container::new(MODEL_FORMAT, manifest, self.clone()).write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model = Container::<Self>::read(path, MODEL_FORMAT)?.payload;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        self.bank.check_compatible(&self.config)?;
        let expected = crate::transform::FeatureLayout::new(&self.bank, &self.config).n_features();
        if self.classifier.n_features() != expected || self.classifier.n_classes() != self.class_names.len() {
            return Err(HydraError::BankMismatch(
                "classifier shape does not match the kernel bank".into(),
            ));
        }
        Ok(())
    }
}

fn transform_input(
    series: ArrayView2<'_, f64>,
    normalize: bool,
    bank: &KernelBank,
    config: &HydraConfig,
) -> Result<FeatureMatrix> {
    if normalize {
        let mut owned = series.to_owned();
        z_normalize_rows(&mut owned);
        transform(owned.view(), bank, config)
    } else {
        transform(series, bank, config)
    }
}
