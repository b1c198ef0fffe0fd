#pragma once

// Generated by tools/embed_templates.py from tests/golden/templates; do not edit.

#include <string_view>

namespace ctot::templates {

inline constexpr std::string_view game24_answer = R"tpl(Use numbers and basic arithmetic operations (+ - * /) to obtain 24. Each step, you are only allowed to choose two of the remaining numbers to obtain a new number.
    Input: 4 4 6 8
    Steps:
    4 + 8 = 12 (left: 4 6 12)
    6 - 4 = 2 (left: 2 12)
    2 * 12 = 24 (left: 24)
    Answer: (6 - 4) * (4 + 8) = 24
    Input: 2 9 10 12
    Steps:
    12 * 2 = 24 (left: 9 10 24)
    10 - 9 = 1 (left: 1 24)
    24 * 1 = 24 (left: 24)
    Answer: (12 * 2) * (10 - 9) = 24
    Input: {input})tpl";

inline constexpr std::string_view game24_compare_1 = R"tpl(I will give you two groups of numbers. The evaluation criteria is if using all of the given numbers with basic arithmetic operations (+ - * /) can reach 24. You should compare the two inputs and decide which input is better. You should only reply 1 or 2. 
    input_1: 2 12
    2 * 12 = 24
    input_2: 11 12
    all arithmetic operations can't get 24
    Answer: 1
    input_1: 1 2 4
    too small
    input_2: 3 8
    3 * 8 =24
    Answer: 2
    input_1: 1 12 11
    1 + 12 + 11 = 24
    input_2: 12 12
    12 + 12 = 24
    Both can reach 24, randomly select one
    Answer: 1
    input_1: {input_1}
    input_2: {input_2}
    Answer: )tpl";

inline constexpr std::string_view game24_compare_2 = R"tpl(I will give you two groups of numbers. Tell me which input is better. The better one is more possible to reach 24 by using all of the given numbers with basic arithmetic operations (+ - * /). You should only reply 1 or 2.
    input_1: 2 12
    2 * 12 = 24
    input_2: 11 12
    all arithmetic operations can't get 24
    Answer: 1
    input_1: 1 2 4
    too small
    input_2: 3 8
    3 * 8 =24
    Answer: 2
    input_1: 1 12 11
    1 + 12 + 11 = 24
    input_2: 12 12
    12 + 12 = 24
    Both can reach 24, randomly select one
    Answer: 1
    input_1: {input_1}
    input_2: {input_2}
    Answer: )tpl";

inline constexpr std::string_view game24_compare_3 = R"tpl(Here are two groups of numbers. Tell me which input is more possible to use all of the given numbers with basic arithmetic operations (+ - * /) to get 24. You should only reply 1 or 2. Don't add any explanation.
    input_1: 2 12
    2 * 12 = 24
    input_2: 11 12
    all arithmetic operations can't get 24
    Answer: 1
    input_1: 1 2 4
    too small
    input_2: 3 8
    3 * 8 =24
    Answer: 2
    input_1: 1 12 11
    1 + 12 + 11 = 24
    input_2: 12 12
    12 + 12 = 24
    Both can reach 24, randomly select one
    Answer: 1
    input_1: {input_1}
    input_2: {input_2}
    Answer: )tpl";

inline constexpr std::string_view game24_propose = R"tpl(You should choose two of the input numbers and use basic arithmetic operations (+ - * /) to obtain a new number. The new number should replace those two input numbers. Give me at least 6 possible next steps.
    Input: 2 8 8 14
    Possible next steps:
    2 + 8 = 10 (left: 8 10 14)
    8 / 2 = 4 (left: 4 8 14)
    14 + 2 = 16 (left: 8 8 16)
    2 * 8 = 16 (left: 8 14 16)
    8 - 2 = 6 (left: 6 8 14)
    14 - 8 = 6 (left: 2 6 8)
    14 /  2 = 7 (left: 7 8 8)
    14 - 2 = 12 (left: 8 8 12)
    Input: {input}
    Possible next steps:)tpl";

inline constexpr std::string_view qa_compare_1 = R"tpl(You should judge which of the two analysis is better. You must only reply 1 or 2. 
    1: {input_1} 
    2: {input_2})tpl";

inline constexpr std::string_view qa_compare_2 = R"tpl(Find out which of the two analysis is better. You must only reply 1 or 2. 
    1: {input_1} 
    2: {input_2})tpl";

inline constexpr std::string_view qa_compare_3 = R"tpl(Compare the two analysis and find which is better. You must only reply 1 or 2. 
    1: {input_1} 
    2: {input_2})tpl";

inline constexpr std::string_view qa_generate = R"tpl(Here is a question. You should work on it step by step. Your answer must be only the alphabet of your choice and begin with ###. For example: ###A, which should be at the last line. Q: {question})tpl";

inline constexpr std::string_view sudoku_compare_1 = R"tpl(You should judge which of the two two-dimensional array better represents a {puzzle_size}x{puzzle_size} Sudoku puzzle. '*' means the value is yet to be decided. You should judge by considering if in each row or column 1 to {puzzle_size} could appear and only appear once. You must only reply 1 or 2. 
    1:{input_1}
    2:{input_2})tpl";

inline constexpr std::string_view sudoku_compare_2 = R"tpl(Find which of the two two-dimensional array better represents a {puzzle_size}x{puzzle_size} Sudoku puzzle. '*' means the value hasn't been decided. The better one should satisfy that in each row or column 1 to {puzzle_size} could appear and only appear once. You must only reply 1 or 2.
    1:{input_1}
    2:{input_2})tpl";

inline constexpr std::string_view sudoku_compare_3 = R"tpl(Which of the two two-dimensional array better represents a {puzzle_size}x{puzzle_size} Sudoku puzzle? '*' means the value is yet to be decided. A better one means in each row or column 1 to {puzzle_size} could appear and only appear once. You must only reply 1 or 2.
    1:{input_1}
    2:{input_2})tpl";

inline constexpr std::string_view sudoku_generate = R"tpl(This is a {puzzle_size}x{puzzle_size} two-dimensional array represents a matrix, where some numbers are already given, and '*' represents the numbers that need to be filled in. You should pick 1 or 2 '*' to fill in a number between 1 to {puzzle_size}. Don't change the given number. Don't complete the whole puzzle immediately until there is only 1 or 2 '*' left to be filled in. Your answer should just be the same format as the question below. When you answer, begin with ###. For example: ###[[1, *, *], [*, 1, *], [*, 2, *]]
    Question: {question})tpl";

} // namespace ctot::templates
