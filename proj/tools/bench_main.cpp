#include <chrono>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtlts/encoder.hpp"
#include "mtlts/parallel.hpp"
#include "mtlts/tape.hpp"
#include "mtlts/verifier.hpp"

using namespace mtlts;

namespace {

// Synthetic cascade batch: enough arithmetic per item to make the fork/join
// overhead visible, small enough to iterate quickly.
std::vector<Thread> make_threads(int count, Rng& rng) {
  std::vector<Thread> threads;
  for (int i = 0; i < count; ++i) {
    Thread t;
    t.event = "bench";
    t.source_id = "s" + std::to_string(i);
    auto text = [&] {
      std::string s;
      int words = rng.uniform_int(4, 10);
      for (int w = 0; w < words; ++w) {
        if (w) s += ' ';
        s += "word" + std::to_string(rng.uniform_int(0, 49));
      }
      return s;
    };
    CascadeNode src;
    std::string src_text = text();
    src.tweet = {t.source_id, src_text, 1000 + i, count_words(src_text)};
    src.depth = 0;
    t.nodes[t.source_id] = src;
    int replies = rng.uniform_int(2, 6);
    for (int r = 0; r < replies; ++r) {
      CascadeNode node;
      std::string id = t.source_id + "r" + std::to_string(r);
      std::string reply_text = text();
      node.tweet = {id, reply_text, 2000 + r, count_words(reply_text)};
      node.parent_id = t.source_id;
      node.depth = 1;
      node.stance_label = static_cast<Stance>(rng.uniform_int(0, 3));
      t.nodes[id] = node;
      t.nodes[t.source_id].children.push_back(id);
    }
    t.ver_label = i % 2 ? VerLabel::kVerified : VerLabel::kUnverified;
    t.validate();
    threads.push_back(std::move(t));
  }
  return threads;
}

struct Acc {
  GradStore g;
  double loss = 0.0;
};

Acc batch_pass(const std::vector<Thread>& threads, const ParamStore& params,
               const Encoder& enc, const Verifier& ver, int workers) {
  return par::block_map_reduce<Acc>(
      static_cast<int>(threads.size()), workers,
      [&] {
        Acc acc;
        acc.g.init(params);
        return acc;
      },
      [&](Acc& acc, int i) {
        Tape tape(&params, &acc.g);
        VerifierOutput out = ver.run(tape, enc, threads[static_cast<std::size_t>(i)]);
        Var loss = ver.loss(tape, out, threads[static_cast<std::size_t>(i)], 1.0);
        acc.loss += tape.scalar(loss);
        tape.backward(loss);
      },
      [](Acc& into, const Acc& part) {
        into.g.add(part.g);
        into.loss += part.loss;
      });
}

bool bit_equal(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial reference vs OpenMP batch kernel"};
  int items = 256, repeat = 5, workers = par::max_hardware_threads();
  app.add_option("--items", items, "threads per batch");
  app.add_option("--repeat", repeat, "timed repetitions");
  app.add_option("--workers", workers, "parallel worker count");
  CLI11_PARSE(app, argc, argv);

  Rng rng(42, "bench");
  auto threads = make_threads(items, rng);

  std::vector<TokenSequence> seqs;
  for (const auto& t : threads)
    for (const auto& id : t.ordered_ids()) seqs.push_back(tokenize(t.node(id).tweet.text, id));
  Vocabulary vocab = Vocabulary::build(seqs);

  ParamStore params;
  Encoder enc(EncoderMode::kTrainable, 32);
  Rng init_rng(42, "init");
  enc.init_trainable(params, vocab, init_rng);
  VerifierConfig vc;
  vc.d_enc = 32;
  vc.d_h = 32;
  Verifier ver(vc);
  ver.init(params, init_rng);

  auto timed = [&](int w) {
    auto t0 = std::chrono::steady_clock::now();
    Acc acc;
    for (int r = 0; r < repeat; ++r) acc = batch_pass(threads, params, enc, ver, w);
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
    return std::pair<double, Acc>(ms / repeat, std::move(acc));
  };

  auto [serial_ms, serial] = timed(1);
  auto [parallel_ms, parallel] = timed(workers);

  bool same = serial.loss == parallel.loss;
  for (int i = 0; same && i < params.size(); ++i)
    same = bit_equal(serial.g[i], parallel.g[i]);

  std::cout << "items " << items << ", repeat " << repeat << "\n"
            << "serial   " << serial_ms << " ms/batch\n"
            << "workers=" << workers << "  " << parallel_ms << " ms/batch\n"
            << "speedup  " << serial_ms / parallel_ms << "x\n"
            << "bit-identical loss and gradients: " << (same ? "yes" : "NO") << "\n";
  return same ? 0 : 1;
}
