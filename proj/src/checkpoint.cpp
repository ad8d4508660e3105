#include "mtlts/checkpoint.hpp"

using nlohmann::json;

namespace mtlts {

namespace {
constexpr char kMagic[4] = {'M', 'T', 'L', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  json header;
  json cfg = json::object();
  for (const auto& [k, v] : ckpt.config.entries()) cfg[k] = v;
  header["config"] = std::move(cfg);
  header["vocab"] = ckpt.vocab.to_json();
  header["train_events"] = ckpt.train_events;
  header["test_event"] = ckpt.test_event;
  json dir = json::array();
  for (int i = 0; i < ckpt.params.size(); ++i) {
    const Tensor& t = ckpt.params[i];
    dir.push_back(json{{"name", t.name},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()}});
  }
  header["tensors"] = std::move(dir);

  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  std::string head_bytes = header.dump();
  put_u64(buf, head_bytes.size());
  buf += head_bytes;
  for (int i = 0; i < ckpt.params.size(); ++i) {
    const Mat& m = ckpt.params[i].value;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(buf, m(r, c));
  }
  write_file(path, buf);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::string buf = read_file(path);
  if (buf.size() < 16 || std::string(buf, 0, 4) != std::string(kMagic, 4))
    fail("checkpoint " + path.string() + ": bad magic");
  std::size_t off = 4;
  std::uint32_t version = get_u32(buf, off);
  if (version != kVersion)
    fail("checkpoint " + path.string() + ": unsupported version " + std::to_string(version));
  std::uint64_t head_len = get_u64(buf, off);
  if (off + head_len > buf.size()) fail("checkpoint " + path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(buf.substr(off, head_len));
  } catch (const std::exception& e) {
    fail("checkpoint " + path.string() + ": bad header: " + e.what());
  }
  off += head_len;

  Checkpoint ckpt;
  for (auto it = header.at("config").begin(); it != header.at("config").end(); ++it)
    ckpt.config.set(it.key(), it.value().get<std::string>());
  ckpt.vocab = Vocabulary::from_json(header.at("vocab"));
  ckpt.train_events = header.at("train_events").get<std::vector<std::string>>();
  ckpt.test_event = header.at("test_event").get<std::string>();
  for (const auto& entry : header.at("tensors")) {
    int rows = entry.at("rows").get<int>();
    int cols = entry.at("cols").get<int>();
    if (rows <= 0 || cols <= 0) fail("checkpoint " + path.string() + ": bad tensor shape");
    int id = ckpt.params.add(entry.at("name").get<std::string>(), rows, cols);
    Mat& m = ckpt.params[id].value;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = get_f64(buf, off);
  }
  if (off != buf.size()) fail("checkpoint " + path.string() + ": trailing bytes");
  return ckpt;
}

}  // namespace mtlts
