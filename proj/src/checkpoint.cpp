#include "gsvin/checkpoint.hpp"

#include "gsvin/binio.hpp"
#include "gsvin/errors.hpp"

namespace gsvin {
namespace {

constexpr std::string_view kMagic = "GSVINCK";
constexpr std::string_view kSlotPrefix = "rmsprop/";

void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  const Shape& s = t.shape();
  for (std::size_t d : {s.batch, s.channels, s.height, s.width}) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f64(v);
}

}  // namespace

std::string encode_checkpoint(const TrainState& state) {
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kCheckpointVersion);
  nlohmann::json meta{{"record", state.record},
                      {"epochs_done", state.epochs_done},
                      {"steps", state.steps},
                      {"history", state.history}};
  w.str(meta.dump());
  w.u32(static_cast<std::uint32_t>(state.params.size() + state.slots.size()));
  for (const NamedTensor& e : state.params.entries()) write_tensor(w, e.name, e.value);
  for (const NamedTensor& e : state.slots.entries()) write_tensor(w, std::string(kSlotPrefix) + e.name, e.value);
  w.seal();
  return w.bytes();
}

TrainState decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("not a checkpoint (bad magic)");
  }
  ByteReader r(checked_payload(bytes));
  r.raw(kMagic.size());
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  TrainState s;
  try {
    const nlohmann::json meta = nlohmann::json::parse(r.str());
    s.record = meta.at("record").get<RunRecord>();
    s.epochs_done = meta.at("epochs_done").get<int>();
    s.steps = meta.at("steps").get<std::uint64_t>();
    s.history = meta.at("history").get<DivergenceHistory>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    Shape shape{r.u32(), r.u32(), r.u32(), r.u32()};
    if (shape.size() * 8 > r.remaining()) throw FormatError("checkpoint tensor '" + name + "' is truncated");
    Tensor t(shape);
    for (double& v : t.data()) v = r.f64();
    if (name.starts_with(kSlotPrefix)) {
      s.slots.add(name.substr(kSlotPrefix.size()), std::move(t));
    } else {
      s.params.add(std::move(name), std::move(t));
    }
  }
  if (r.remaining() != 0) throw FormatError("checkpoint has trailing bytes");
  const ParamSet layout = zero_params(s.record.model);
  for (const NamedTensor& e : layout.entries()) {
    if (!s.params.contains(e.name) || s.params.get(e.name).shape() != e.value.shape()) {
      throw FormatError("checkpoint parameter '" + e.name + "' is missing or has the wrong shape");
    }
  }
  if (s.slots.size() == 0) s.slots = zero_slots(s.params);
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  write_file(path, encode_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace gsvin
