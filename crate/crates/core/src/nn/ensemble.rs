use super::network::{argmax, Model};
use crate::error::{Error, Result};
use crate::image::{resize, to_grayscale, ImageTensor};
use crate::scalar::Real;
use crate::transforms::TransformSpec;

/// Transform, grayscale and resize an image into a model's input space.
pub fn model_input<T: Real>(model: &Model<T>, spec: &TransformSpec, img: &ImageTensor<T>) -> Result<ImageTensor<T>> {
    let [h, w] = model.arch.input_size;
    resize(&to_grayscale(&spec.apply(img)?), h, w)
}

/// Elementwise mean of probability vectors.
pub fn average_probabilities(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect()
}

/// Averaged softmax output of `models[i]` applied to `specs[i](img)`.
pub fn ensemble_probabilities<T: Real>(models: &[&Model<T>], specs: &[TransformSpec], img: &ImageTensor<T>) -> Result<Vec<f64>> {
    if models.is_empty() || models.len() != specs.len() {
        return Err(Error::param(
            "models",
            format!("need one transform per model and at least one model, got {} models and {} transforms", models.len(), specs.len()),
        ));
    }
    if let Some(m) = models.iter().find(|m| m.num_classes() != models[0].num_classes()) {
        return Err(Error::param("models", format!("class counts differ ({} vs {})", m.num_classes(), models[0].num_classes())));
    }
    let rows = models
        .iter()
        .zip(specs)
        .map(|(m, s)| m.probabilities(&model_input(m, s, img)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(average_probabilities(&rows))
}

/// Class with the highest averaged probability; ties go to the lower class id.
pub fn ensemble_predict<T: Real>(models: &[&Model<T>], specs: &[TransformSpec], img: &ImageTensor<T>) -> Result<usize> {
    Ok(argmax(&ensemble_probabilities(models, specs, img)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let avg = average_probabilities(&[vec![0.6, 0.4], vec![0.2, 0.8]]);
        assert!((avg[0] - 0.4).abs() < 1e-12 && (avg[1] - 0.6).abs() < 1e-12);
        assert_eq!(argmax(&avg), 1);
    }

    #[test]
    fn length_mismatch() {
        let m = Model::<f32>::init(crate::nn::ArchSpec::mini_vgg(2, 8), 0).unwrap();
        let img = ImageTensor::filled(8, 8, 1, 0.5).unwrap();
        assert!(ensemble_predict(&[&m], &[], &img).is_err());
        assert!(ensemble_predict::<f32>(&[], &[], &img).is_err());
    }
}
