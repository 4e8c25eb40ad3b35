pub(crate) const MAX_DIMS: usize = 64;

/// Primitive polynomial and initial direction numbers per dimension
/// (dimension 0 is the van der Corput radical inverse).
pub(crate) const DIRECTIONS: [(u32, [u32; 18]); 64] = [
    (1, [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (3, [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (7, [1, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (11, [1, 3, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (13, [1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (19, [1, 1, 3, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (25, [1, 3, 5, 13, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (37, [1, 1, 5, 5, 17, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (41, [1, 1, 5, 5, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (47, [1, 1, 7, 11, 19, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (55, [1, 1, 5, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (59, [1, 1, 1, 3, 11, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (61, [1, 3, 5, 5, 31, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (67, [1, 3, 3, 9, 7, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (91, [1, 1, 1, 15, 21, 21, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (97, [1, 3, 1, 13, 27, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (103, [1, 1, 1, 15, 7, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (109, [1, 3, 1, 15, 13, 25, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (115, [1, 1, 5, 5, 19, 61, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (131, [1, 3, 7, 11, 23, 15, 103, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (137, [1, 3, 7, 13, 13, 15, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (143, [1, 1, 3, 13, 7, 35, 63, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (145, [1, 3, 5, 9, 1, 25, 53, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (157, [1, 3, 1, 13, 9, 35, 107, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (167, [1, 3, 1, 5, 27, 61, 31, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (171, [1, 1, 5, 11, 19, 41, 61, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (185, [1, 3, 5, 3, 3, 13, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (191, [1, 1, 7, 13, 1, 19, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (193, [1, 3, 7, 5, 13, 19, 59, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (203, [1, 1, 3, 9, 25, 29, 41, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (211, [1, 3, 5, 13, 23, 1, 55, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (213, [1, 3, 7, 3, 13, 59, 17, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (229, [1, 3, 1, 3, 5, 53, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (239, [1, 1, 5, 5, 23, 33, 13, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (241, [1, 1, 7, 7, 1, 61, 123, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (247, [1, 1, 7, 9, 13, 61, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (253, [1, 3, 3, 5, 3, 55, 33, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (285, [1, 3, 1, 15, 31, 13, 49, 245, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (299, [1, 3, 5, 15, 31, 59, 63, 97, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (301, [1, 3, 1, 11, 11, 11, 77, 249, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (333, [1, 3, 1, 11, 27, 43, 71, 9, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (351, [1, 1, 7, 15, 21, 11, 81, 45, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (355, [1, 3, 7, 3, 25, 31, 65, 79, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (357, [1, 3, 1, 1, 19, 11, 3, 205, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (361, [1, 1, 5, 9, 19, 21, 29, 157, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (369, [1, 3, 7, 11, 1, 33, 89, 185, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (391, [1, 3, 3, 3, 15, 9, 79, 71, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (397, [1, 3, 7, 11, 15, 39, 119, 27, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (425, [1, 1, 3, 1, 11, 31, 97, 225, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (451, [1, 1, 1, 3, 23, 43, 57, 177, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (463, [1, 3, 7, 7, 17, 17, 37, 71, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (487, [1, 3, 1, 5, 27, 63, 123, 213, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (501, [1, 1, 3, 5, 11, 43, 53, 133, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (529, [1, 3, 5, 5, 29, 17, 47, 173, 479, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (539, [1, 3, 3, 11, 3, 1, 109, 9, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (545, [1, 1, 1, 5, 17, 39, 23, 5, 343, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (557, [1, 3, 1, 5, 25, 15, 31, 103, 499, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (563, [1, 1, 1, 11, 11, 17, 63, 105, 183, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (601, [1, 1, 5, 11, 9, 29, 97, 231, 363, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (607, [1, 1, 5, 15, 19, 45, 41, 7, 383, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (617, [1, 3, 7, 7, 31, 19, 83, 137, 221, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (623, [1, 1, 1, 3, 23, 15, 111, 223, 83, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (631, [1, 1, 5, 13, 31, 15, 55, 25, 161, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (637, [1, 1, 3, 13, 25, 47, 39, 87, 257, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
];
