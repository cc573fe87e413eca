#include "tvp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "tvp/config.hpp"
#include "tvp/error.hpp"

namespace tvp {
namespace {

constexpr char kMagic[8] = {'T', 'V', 'P', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename U>
void put(std::string& buf, U v) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, &v, sizeof(U));
  buf.append(bytes, sizeof(U));
}

class Reader {
 public:
  Reader(const std::string& data, std::string what) : data_(data), what_(std::move(what)) {}

  template <typename U>
  U get() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }

  const char* take(std::size_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::corrupt_checkpoint, what_ + ": truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const std::string& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json tensors = nlohmann::json::array();
  std::string payload;
  ckpt.model.for_each_param([&](const std::string& name, ParamGroup, const nn::Tensor<float>& t) {
    tensors.push_back({{"name", name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
    payload.append(reinterpret_cast<const char*>(t.value.data()),
                   static_cast<std::size_t>(t.value.size()) * sizeof(float));
  });
  const nlohmann::json header{{"model", to_json(ckpt.model.config())},
                              {"vocabulary", ckpt.vocab.words()},
                              {"mode", std::string(to_string(ckpt.mode))},
                              {"prompt", to_json(ckpt.prompt_template)},
                              {"assembly", to_json(ckpt.assembly)},
                              {"decode", to_json(ckpt.decode)},
                              {"seed", ckpt.seed},
                              {"step", ckpt.step},
                              {"dtype", "float32"},
                              {"tensors", tensors}};
  const std::string header_text = header.dump();

  std::string buf(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kCheckpointVersion);
  put<std::uint64_t>(buf, header_text.size());
  buf += header_text;
  put<std::uint64_t>(buf, payload.size());
  buf += payload;
  put<std::uint64_t>(buf, fnv1a(buf.data(), buf.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::io_error, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::missing_file, "checkpoint " + path.string());
  std::string data;
  {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    data = ss.str();
  }
  const std::string what = path.string();
  Reader r(data, what);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::corrupt_checkpoint, what + ": not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::checkpoint_version,
                what + ": version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto header_len = r.get<std::uint64_t>();
  const char* header_ptr = r.take(header_len);
  const auto payload_len = r.get<std::uint64_t>();
  const char* payload = r.take(payload_len);
  const std::size_t body_len = r.pos();
  const auto checksum = r.get<std::uint64_t>();
  if (r.remaining() != 0 || checksum != fnv1a(data.data(), body_len)) {
    throw Error(ErrorCode::corrupt_checkpoint, what + ": checksum mismatch");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(std::string(header_ptr, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::corrupt_checkpoint, what + ": bad header: " + e.what());
  }

  Checkpoint ckpt;
  try {
    const ModelConfig cfg = model_config_from_json(header.at("model"));
    const auto words = header.at("vocabulary").get<std::vector<std::string>>();
    ckpt.vocab = Vocabulary(std::vector<std::string>(words.begin() + std::min<std::size_t>(words.size(), Vocabulary::kNumSpecial + 10), words.end()));
    if (ckpt.vocab.words() != words) throw Error(ErrorCode::corrupt_checkpoint, what + ": vocabulary order");
    if (cfg.vocab_size != ckpt.vocab.size()) {
      throw Error(ErrorCode::checkpoint_version, what + ": vocab_size does not match the stored vocabulary");
    }
    ckpt.mode = mode_from_string(header.at("mode").get<std::string>());
    ckpt.prompt_template = prompt_template_from_json(header.at("prompt"));
    ckpt.assembly = assembly_options_from_json(header.at("assembly"));
    ckpt.decode = decode_options_from_json(header.at("decode"));
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<long>();
    if (header.at("dtype").get<std::string>() != "float32") {
      throw Error(ErrorCode::checkpoint_version, what + ": unsupported dtype");
    }
    ckpt.model = Model<float>(cfg, 0);
    const auto& tensors = header.at("tensors");
    std::size_t i = 0;
    std::size_t offset = 0;
    ckpt.model.for_each_param([&](const std::string& name, ParamGroup, nn::Tensor<float>& t) {
      if (i >= tensors.size()) throw Error(ErrorCode::checkpoint_version, what + ": missing tensor " + name);
      const auto& e = tensors[i++];
      if (e.at("name").get<std::string>() != name || e.at("rows").get<long>() != t.value.rows() ||
          e.at("cols").get<long>() != t.value.cols()) {
        throw Error(ErrorCode::checkpoint_version, what + ": tensor " + name + " has a different shape");
      }
      const std::size_t bytes = static_cast<std::size_t>(t.value.size()) * sizeof(float);
      if (offset + bytes > payload_len) throw Error(ErrorCode::corrupt_checkpoint, what + ": payload too short");
      std::memcpy(t.value.data(), payload + offset, bytes);
      offset += bytes;
    });
    if (i != tensors.size() || offset != payload_len) {
      throw Error(ErrorCode::checkpoint_version, what + ": tensor table does not match the model");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::corrupt_checkpoint, what + ": bad header: " + e.what());
  }
  return ckpt;
}

void restore_parameters(const Model<float>& source, Model<float>& target) {
  std::vector<const nn::Tensor<float>*> src;
  source.for_each_param([&](const std::string&, ParamGroup, const nn::Tensor<float>& t) { src.push_back(&t); });
  std::size_t i = 0;
  target.for_each_param([&](const std::string& name, ParamGroup, nn::Tensor<float>& t) {
    if (i >= src.size() || src[i]->value.rows() != t.value.rows() || src[i]->value.cols() != t.value.cols()) {
      throw Error(ErrorCode::checkpoint_version, "tensor " + name + " has a different shape");
    }
    t.value = src[i++]->value;
  });
  if (i != src.size()) throw Error(ErrorCode::checkpoint_version, "tensor count differs");
}

bool parameters_equal(const Model<float>& a, const Model<float>& b) {
  std::vector<const nn::Tensor<float>*> ta;
  a.for_each_param([&](const std::string&, ParamGroup, const nn::Tensor<float>& t) { ta.push_back(&t); });
  std::size_t i = 0;
  bool equal = true;
  b.for_each_param([&](const std::string&, ParamGroup, const nn::Tensor<float>& t) {
    if (i >= ta.size() || ta[i]->value.rows() != t.value.rows() || ta[i]->value.cols() != t.value.cols() ||
        std::memcmp(ta[i]->value.data(), t.value.data(), static_cast<std::size_t>(t.value.size()) * sizeof(float)) != 0) {
      equal = false;
    }
    ++i;
  });
  return equal && i == ta.size();
}

}  // namespace tvp
