#pragma once

// PNG reading and writing for RGB images and integer label maps.

#include <torch/torch.h>

#include <string>

namespace scam {

/// uint8 [H, W, 3]. Grayscale is broadcast to RGB, alpha is dropped.
torch::Tensor read_rgb_png(const std::string& path);

/// 8-bit RGB PNG from uint8 [H, W, 3].
void write_rgb_png(const std::string& path, const torch::Tensor& rgb);

/// int64 [H, W] from a single-channel 8- or 16-bit PNG of label indices.
torch::Tensor read_label_png(const std::string& path);

/// Single-channel PNG; 16-bit when any label exceeds 255.
void write_label_png(const std::string& path, const torch::Tensor& labels);

/// uint8 [H, W, 3] -> float [3, H, W] in [-1, 1].
torch::Tensor to_signed_unit(const torch::Tensor& rgb, torch::Dtype dtype = torch::kFloat32);

/// float [3, H, W] in [-1, 1] -> uint8 [H, W, 3] (clamped, rounded).
torch::Tensor from_signed_unit(const torch::Tensor& image);

}  // namespace scam
