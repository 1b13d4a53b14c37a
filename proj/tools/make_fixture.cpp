// Writes a synthetic labeled corpus and matching word2vec text file, for
// smoke runs of the pipeline without real data.
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "pico/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dataset and embeddings"};
  pico::SyntheticOptions opt;
  std::size_t dimension = 8;
  std::string dataset, vectors;
  app.add_option("--abstracts", opt.abstracts, "Number of abstracts");
  app.add_option("--seed", opt.seed, "Generator seed")->required();
  app.add_option("--dim", dimension, "Embedding dimension");
  app.add_option("--dataset", dataset, "Output dataset file")->required();
  app.add_option("--vectors", vectors, "Output word2vec text file")->required();
  CLI11_PARSE(app, argc, argv);

  const auto corpus = pico::make_synthetic_corpus(opt);
  std::ofstream ds(dataset, std::ios::binary);
  pico::serialize_dataset(ds, corpus.abstracts);
  const auto pretrained = pico::make_random_vectors(corpus.words, dimension, opt.seed + 1);
  std::ofstream vs(vectors, std::ios::binary);
  std::vector<std::vector<double>> rows;
  for (const auto& w : corpus.words) rows.push_back(pretrained.vectors.at(w));
  pico::write_word2vec(vs, corpus.words, rows, pico::Word2VecFormat::kText);
  if (!ds || !vs) {
    std::cerr << "error: failed writing output\n";
    return 2;
  }
  return 0;
}
