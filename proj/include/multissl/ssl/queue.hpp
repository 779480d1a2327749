#pragma once

#include "multissl/core/rng.hpp"
#include "multissl/nn/tensor.hpp"

namespace multissl::ssl {

/// Fixed-capacity FIFO of L2-normalized key embeddings. Keys are enqueued one
/// batch at a time; the capacity must be a multiple of the batch size so a
/// batch never straddles the wrap-around.
class KeyQueue {
 public:
  KeyQueue(int capacity, int dim, int batch_size);

  /// Fills every slot with a random unit vector.
  void fill_random(Rng& rng);
  /// keys [batch_size, dim] overwrite the oldest batch.
  void enqueue(const nn::Tensor& keys);

  /// Storage order, [capacity, dim].
  const nn::Tensor& entries() const { return entries_; }
  /// Entries from oldest to newest.
  nn::Tensor ordered() const;
  int capacity() const { return capacity_; }
  int dim() const { return dim_; }
  int write_pointer() const { return ptr_; }

 private:
  int capacity_;
  int dim_;
  int batch_size_;
  int ptr_ = 0;
  nn::Tensor entries_;
};

}  // namespace multissl::ssl
