#pragma once

#include <cstddef>
#include <functional>

namespace qmh {

/// Worker count: QMHLAB_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();

/// Runs body(shard) for shard in [0, shards). Results must not depend on the
/// worker count, so callers key their random streams by shard.
void parallel_for(std::size_t shards, const std::function<void(std::size_t)>& body);

}  // namespace qmh
