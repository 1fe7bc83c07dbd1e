// Writes a synthetic eight-document project for trying the pipeline.
#include <iostream>

#include <CLI11.hpp>

#include "synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic demo project (manifest.csv and texts/)"};
    std::string out;
    std::uint64_t seed = 42;
    bool with_short = false;
    app.add_option("dir", out, "Project directory to create")->required();
    app.add_option("--seed", seed, "Generator seed")->capture_default_str();
    app.add_flag("--with-short", with_short, "Add a ninth, five-sentence document");
    CLI11_PARSE(app, argc, argv);

    auto docs = themescope::testing::demo_corpus(seed);
    if (with_short) docs.push_back(themescope::testing::tiny_document("09"));
    themescope::testing::write_project(out, docs);
    std::cout << "wrote " << docs.size() << " documents to " << out << "\n";
    return 0;
}
