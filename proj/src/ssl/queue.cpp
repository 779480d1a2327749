#include "multissl/ssl/queue.hpp"

#include <cmath>

#include "multissl/core/error.hpp"

namespace multissl::ssl {

KeyQueue::KeyQueue(int capacity, int dim, int batch_size)
    : capacity_(capacity), dim_(dim), batch_size_(batch_size), entries_({capacity, dim}, 0.0) {
  if (batch_size < 1 || capacity < batch_size || capacity % batch_size != 0) {
    throw Error("queue capacity " + std::to_string(capacity) + " is not a multiple of batch size " +
                std::to_string(batch_size));
  }
}

void KeyQueue::fill_random(Rng& rng) {
  for (int r = 0; r < capacity_; ++r) {
    double norm = 0.0;
    double* row = entries_.ptr() + static_cast<int64_t>(r) * dim_;
    for (int c = 0; c < dim_; ++c) {
      row[c] = rng.normal();
      norm += row[c] * row[c];
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < dim_; ++c) row[c] /= norm;
  }
}

void KeyQueue::enqueue(const nn::Tensor& keys) {
  if (keys.shape != nn::Shape{batch_size_, dim_}) {
    throw Error("queue: expected keys [" + std::to_string(batch_size_) + "," + std::to_string(dim_) + "], got " +
                nn::to_string(keys.shape));
  }
  std::copy(keys.data.begin(), keys.data.end(), entries_.data.begin() + static_cast<std::ptrdiff_t>(ptr_) * dim_);
  ptr_ = (ptr_ + batch_size_) % capacity_;
}

nn::Tensor KeyQueue::ordered() const {
  nn::Tensor out(entries_.shape);
  for (int i = 0; i < capacity_; ++i) {
    const int src = (ptr_ + i) % capacity_;
    std::copy_n(entries_.data.begin() + static_cast<std::ptrdiff_t>(src) * dim_, dim_,
                out.data.begin() + static_cast<std::ptrdiff_t>(i) * dim_);
  }
  return out;
}

}  // namespace multissl::ssl
