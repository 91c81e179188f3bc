"""
Stores all config objects for the program.

Every stage of the pipeline reads its arguments from one section of a :py:class:`.RunConfig`.
The artifact directories of each stage are named by a hash of only the sections that stage depends on,
so changing evaluation settings never invalidates a pretrained checkpoint.
"""
