#include "run/profiles.hpp"

#include "tensor/error.hpp"

namespace sephr {

namespace {

constexpr const char* kDesk = R"(seed = 0
data.count = 250
data.seed = 0
data.frames = 8
data.bands = 4
data.height = 32
data.width = 32
data.classes = 6
data.noise = 0.1
model.seed = 0
model.paradigm = esd
model.classes = 6
encoder.in_channels = 4
encoder.height = 32
encoder.width = 32
encoder.branches = 1,2,3
encoder.channels = 16,32,64
encoder.separable_depth = 2
encoder.stem_channels = 16
encoder.kernel = 3
encoder.embed_dim = 384
encoder.pooling = flatten
encoder.pointwise_heads = true
attention.heads = 6
attention.positional = true
lstm.layers = 3
lstm.hidden = 256
lstm.bidirectional = true
decoder.seed_channels = 6
decoder.seed_extent = 8
decoder.channels = 32
decoder.kernels = 4
decoder.strides = 2
decoder.paddings = 1
train.lr = 0.001
train.batch_size = 8
train.weight_decay = 0.0001
train.epochs = 30
train.seed = 0
train.fraction = 0.8
train.augment = true
ensemble.members = 5
ensemble.theta = 0.2
ensemble.subset_fraction = 0.8
ensemble.seed = 0
)";

constexpr const char* kTrend = R"(data.height = 16
data.width = 16
encoder.height = 16
encoder.width = 16
encoder.branches = 1,2
encoder.channels = 16,32
encoder.separable_depth = 2
encoder.embed_dim = 384
decoder.seed_channels = 6
decoder.seed_extent = 8
decoder.channels = none
lstm.layers = 1
lstm.hidden = 256
train.lr = 0.002
train.epochs = 40
)";

constexpr const char* kFull = R"(data.count = 250
data.frames = 71
data.height = 24
data.width = 24
data.classes = 48
model.classes = 48
encoder.height = 24
encoder.width = 24
encoder.embed_dim = 768
encoder.pooling = average
encoder.pointwise_heads = false
attention.heads = 6
attention.positional = false
decoder.seed_channels = 12
decoder.seed_extent = 8
decoder.channels = 64
decoder.kernels = 3,3
decoder.strides = 1,3
decoder.paddings = 1,0
train.lr = 0.0001
train.batch_size = 128
train.epochs = 25
train.augment = false
)";

}  // namespace

std::vector<std::string> profile_names() { return {"desk", "trend", "full"}; }

KeyValues profile_config(const std::string& name) {
    KeyValues kv = KeyValues::parse(kDesk);
    if (name == "desk") return kv;
    if (name == "trend") {
        kv.merge(KeyValues::parse(kTrend));
        return kv;
    }
    if (name == "full") {
        kv.merge(KeyValues::parse(kFull));
        return kv;
    }
    detail::raise(ErrorKind::unknown_preset, "unknown profile '", name, "' (expected desk, trend or full)");
}

}  // namespace sephr
